"""Parallel and damped transport package"""
