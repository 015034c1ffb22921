"""Path space calculus package"""
