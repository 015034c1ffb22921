"""SDE integration package"""
