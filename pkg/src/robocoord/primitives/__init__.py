"""Sans-IO coordination primitives. Each returns effects for its host node to carry out."""
