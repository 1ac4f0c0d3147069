from typing import Dict, List

# Real-time market sites used for the four data centers.
# utc_offset drives the phase of synthetic diurnal price curves.
MARKET_SITES = {
    "NYISO": {"label": "New York", "utc_offset": -5, "lat": 40.71, "lon": -74.01},
    "ISO-NE": {"label": "New England", "utc_offset": -7, "lat": 42.36, "lon": -71.06},
    "ERCOT": {"label": "Texas", "utc_offset": -6, "lat": 30.27, "lon": -97.74},
    "NZ": {"label": "New Zealand", "utc_offset": 13, "lat": -36.85, "lon": 174.76},
}

DEFAULT_SITES = ("ISO-NE", "NYISO", "ERCOT", "NZ")

# k-means classes of the two MapReduce workloads: (#jobs, mean GB) per cluster,
# listed by deadline 1..10 slots (largest class gets the tightest deadline).
CLUSTER_PRESETS = {
    "A": [
        (4878, 0.22), (496, 3.13), (196, 9.90), (113, 23.49), (80, 49.59),
        (49, 85.07), (48, 146.67), (19, 286.36), (13, 620.01), (2, 8104.52),
    ],
    "B": [
        (5632, 0.32), (513, 5.85), (170, 18.62), (100, 39.09), (106, 56.52),
        (44, 99.23), (26, 160.90), (29, 350.62), (11, 659.30), (7, 1294.19),
    ],
}

# Diurnal workload shapes: "A" is the typical trace, "B" the bursty one
WORKLOAD_SHAPES = {
    "A": {"peak_to_mean": 0.6, "burst_probability": 0.02, "burst_scale": 1.5},
    "B": {"peak_to_mean": 0.8, "burst_probability": 0.10, "burst_scale": 3.0},
}


def get_cluster_preset(workload: str = "A") -> List[Dict]:
    """Preset cluster rows for one workload as dicts with cluster, jobs, gigabytes and deadline_slots."""
    key = workload.upper()
    if key not in CLUSTER_PRESETS:
        raise KeyError(f"Unknown workload preset '{workload}'; choose from {sorted(CLUSTER_PRESETS)}")
    return [
        {"cluster": i, "jobs": jobs, "gigabytes": gb, "deadline_slots": i}
        for i, (jobs, gb) in enumerate(CLUSTER_PRESETS[key], start=1)
    ]


def get_class_shares(workload: str = "A") -> Dict[int, float]:
    """Fraction of submitted jobs falling in each deadline class."""
    rows = get_cluster_preset(workload)
    total = sum(r["jobs"] for r in rows)
    return {r["deadline_slots"]: r["jobs"] / total for r in rows}


def get_sites(names=None) -> List[Dict]:
    """Site records (with their market name) for the given market names, default four sites."""
    names = names or DEFAULT_SITES
    sites = []
    for name in names:
        if name not in MARKET_SITES:
            raise KeyError(f"Unknown market site '{name}'")
        sites.append({"name": name, **MARKET_SITES[name]})
    return sites
