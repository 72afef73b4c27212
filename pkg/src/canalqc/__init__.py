"""Canal hypersurfaces in Minkowski and Euclidean space with jet-based curvature checks."""
