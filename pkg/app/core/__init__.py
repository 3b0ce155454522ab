"""Core configuration, logging, errors and serialization"""
