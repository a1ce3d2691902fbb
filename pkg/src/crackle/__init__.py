"""Simulation lab for isolated k-tuples ("crackle") in Poisson point clouds.

Modules
-------
distributions  radial densities and Poisson cloud sampling
geometry       geometric graphs, components, enclosing balls, Čech complexes
topology       GF(2) Betti numbers, graph isomorphism, indicators h
scaling        radii R_{k,n}, regimes, contractibility radii
limits         limiting intensities, extremal fidis, stable series
census         statistics on clouds and replicated campaigns
cli            command line front end
"""

__version__ = "0.1.0"
