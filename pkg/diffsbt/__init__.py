"""
Structure-aware encodings of bug-fix commits, corpus tooling and evaluation
"""


__version__ = '0.3.1'
