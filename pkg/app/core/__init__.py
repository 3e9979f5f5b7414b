"""Numerical core: wave model, observations, dense kernels, filters and reconstruction methods"""
