"""Flat Wiener space calculus package"""
