"""
curveflow: deterministische und stochastische renormalisierte Krümmungsflüsse
strikt konvexer ebener Kurven in Winkelparametrisierung.
"""

__version__ = "0.1.0"
