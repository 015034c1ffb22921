"""Manifold models package"""
