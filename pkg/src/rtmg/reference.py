"""Target values for the benchmark tables, keyed by experiment.

Convergence entries list ``(h, e_u, e_p)`` for h = 1/4 ... 1/128; contraction
entries map ``m`` to values for k = 1 ... 6.
"""

CONVERGENCE = {
    ("unit_square", "darcy"): [
        (1 / 4, 4.213e-2, 3.462e-1),
        (1 / 8, 1.026e-2, 1.722e-1),
        (1 / 16, 2.529e-3, 8.594e-2),
        (1 / 32, 6.281e-4, 4.297e-2),
        (1 / 64, 1.565e-4, 2.149e-2),
        (1 / 128, 3.905e-5, 1.074e-2),
    ],
    ("unit_square", "cd"): [
        (1 / 4, 9.188e-2, 3.492e-1),
        (1 / 8, 2.345e-2, 1.727e-1),
        (1 / 16, 5.904e-3, 8.600e-2),
        (1 / 32, 1.480e-3, 4.298e-2),
        (1 / 64, 3.705e-4, 2.150e-2),
        (1 / 128, 9.268e-5, 1.075e-2),
    ],
    ("l_shape", "darcy"): [
        (1 / 4, 1.121e-1, 1.131e-1),
        (1 / 8, 6.654e-2, 5.964e-2),
        (1 / 16, 4.144e-2, 3.244e-2),
        (1 / 32, 2.605e-2, 1.818e-2),
        (1 / 64, 1.640e-2, 1.048e-2),
        (1 / 128, 1.033e-2, 6.186e-3),
    ],
    ("l_shape", "cd"): [
        (1 / 4, 1.306e-1, 1.156e-1),
        (1 / 8, 7.025e-2, 6.023e-2),
        (1 / 16, 4.231e-2, 3.260e-2),
        (1 / 32, 2.629e-2, 1.823e-2),
        (1 / 64, 1.647e-2, 1.049e-2),
        (1 / 128, 1.035e-2, 6.191e-3),
    ],
}

CONTRACTION = {
    ("unit_square", "darcy", "W"): {
        10: (0.80, 0.81, 0.81, 0.81, 0.81, 0.81),
        20: (0.66, 0.67, 0.67, 0.67, 0.67, 0.67),
        40: (0.47, 0.48, 0.48, 0.48, 0.48, 0.48),
        80: (0.24, 0.24, 0.24, 0.24, 0.24, 0.24),
    },
    ("unit_square", "cd", "W"): {
        10: (0.80, 0.81, 0.81, 0.81, 0.81, 0.81),
        20: (0.67, 0.68, 0.67, 0.67, 0.67, 0.67),
        40: (0.48, 0.48, 0.48, 0.48, 0.48, 0.48),
        80: (0.24, 0.24, 0.24, 0.24, 0.24, 0.25),
    },
    ("unit_square", "darcy", "V"): {
        10: (0.80, 0.82, 0.81, 0.82, 0.82, 0.82),
        20: (0.66, 0.68, 0.68, 0.68, 0.68, 0.68),
        40: (0.47, 0.48, 0.48, 0.48, 0.48, 0.48),
        80: (0.24, 0.25, 0.25, 0.25, 0.25, 0.25),
    },
    ("unit_square", "cd", "V"): {
        10: (0.80, 0.82, 0.82, 0.82, 0.82, 0.82),
        20: (0.67, 0.68, 0.68, 0.68, 0.68, 0.68),
        40: (0.48, 0.49, 0.49, 0.49, 0.49, 0.49),
        80: (0.24, 0.25, 0.25, 0.25, 0.25, 0.25),
    },
    ("l_shape", "darcy", "W"): {
        10: (0.81, 0.82, 0.82, 0.82, 0.82, 0.82),
        20: (0.70, 0.70, 0.70, 0.70, 0.70, 0.70),
        40: (0.51, 0.51, 0.51, 0.51, 0.51, 0.51),
        80: (0.28, 0.28, 0.28, 0.28, 0.28, 0.28),
    },
    ("l_shape", "cd", "W"): {
        10: (0.81, 0.82, 0.82, 0.82, 0.82, 0.82),
        20: (0.70, 0.70, 0.70, 0.70, 0.70, 0.70),
        40: (0.52, 0.52, 0.52, 0.52, 0.52, 0.52),
        80: (0.29, 0.29, 0.29, 0.29, 0.29, 0.29),
    },
}

# tolerances used by ``--check``
CONVERGENCE_VALUE_RTOL = {"unit_square": 0.02, "l_shape": 0.05}
CONTRACTION_ATOL = 0.08


def convergence_reference(domain, problem, h):
    for h_ref, e_u, e_p in CONVERGENCE.get((domain, problem), ()):
        if abs(h_ref - h) < 1e-12:
            return e_u, e_p
    return None


def contraction_reference(domain, problem, cycle, m, k):
    table = CONTRACTION.get((domain, problem, cycle))
    if table is None or m not in table or not 1 <= k <= 6:
        return None
    return table[m][k - 1]
