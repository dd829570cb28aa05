"""Environment-backed settings (HEXLOOP_*)"""
