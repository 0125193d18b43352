"""matchain: optimization over products of matrices chosen from a family.

Finite families with a linear objective (antibiotics time machine) are solved by
a disjunctive MILP branch-and-bound; thin-film stacks (discrete materials,
continuous thicknesses) by a spatial branch-and-bound with interval bounds.
"""

__version__ = "0.3.0"
