"""Built-in demo canal hypersurfaces (n = 4, ambient dimension 5)."""

from canalqc.shapes import CanalSpec

DEMO_DOMAIN = (0.9, 1.1)

# name -> (kind, center expressions, radius expression)
DEMOS = {
    "elliptic": ("elliptic", ("s", "0", "0", "0", "0"), "s^2"),
    "hyperbolic": ("hyperbolic", ("0", "s", "0", "0", "0"), "s^2"),
    "parabolic": ("parabolic", ("s", "s", "0", "0", "0"), "s^2"),
    "euclidean": ("euclidean", ("s", "0", "0", "0", "0"), "1 + 0.1*s^2"),
    "hyperbola_center": ("elliptic", ("sinh(s)", "cosh(s)", "0", "0", "0"), "s^2"),
    "circle_center": ("hyperbolic", ("0", "cos(s)", "sin(s)", "0", "0"), "s^2"),
    "null_cubic": (
        "parabolic",
        ("(s + s^3/3)/sqrt(2)", "s^2/sqrt(2)", "(s - s^3/3)/sqrt(2)", "0", "0"),
        "s^2",
    ),
}

ROTATIONAL = ("elliptic", "hyperbolic", "parabolic", "euclidean")
NON_ROTATIONAL = ("hyperbola_center", "circle_center", "null_cubic")


def demo_spec(name, domain=DEMO_DOMAIN):
    try:
        kind, center, radius = DEMOS[name]
    except KeyError:
        raise KeyError(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}") from None
    return CanalSpec.from_strings(kind, center, radius, domain)


def corrupted_b(params, b):
    """The b-field perturbation used to show the Codazzi check has teeth."""
    return b + 0.1 * params[0]
