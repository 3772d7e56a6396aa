"""Sub-Riemannian geodesic models of arm reaching."""
