"""Collocated finite-volume Navier-Stokes/Boussinesq solver on general polyhedral meshes."""

__version__ = "0.1.0"
