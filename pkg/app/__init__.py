"""
caveray - Projection stéréo hors-axe pour le lancer de rayons en CAVE.
"""

__version__ = "0.1.0"
__author__ = "Abdel TOUATI"
