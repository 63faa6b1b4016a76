
__version__ = "0.0.1"
__banner__ = \
"""
# chebfem %s 
# Product-to-sum matrix filling for hierarchical curl-conforming FEM
""" % __version__
