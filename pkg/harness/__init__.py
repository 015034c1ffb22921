"""Experiment harness package"""
