from .impl import Widget
