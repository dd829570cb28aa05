"""Result files: CSV tables, JSON reports and run manifests"""
