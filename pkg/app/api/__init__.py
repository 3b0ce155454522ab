"""API endpoints module"""
