"""Two-barrier Skorokhod reflection for regulated paths and reflected SDEs."""

__version__ = "0.1.0"
