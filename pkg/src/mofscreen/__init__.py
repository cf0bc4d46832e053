"""High-throughput adsorption screening of porous frameworks.

Modules: ``structio`` (CIF, cells, supercells), ``poregeom`` (pore geometry),
``potential`` (force field, LJ + Ewald), ``gcmc`` and ``widom`` (Monte Carlo),
``chemgraph`` and ``fingerprint`` (bond graph, atom types, structural keys),
``mlcore`` (tree ensembles, TreeSHAP) and ``pipeline`` (batch driver, CLI).
"""
__version__ = "0.1.0"
