"""Models Package"""
