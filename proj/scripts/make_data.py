#!/usr/bin/env python3
"""Regenerates the synthetic profile, workloads, samples and trace in data/."""

import json
import math
import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data"

# VGG-19-like synthetic ground truth. CPU coefficients scale as b^0.95.
XI1, XI2 = 0.012, 0.03
AVG = (3.0, 0.6, 0.14)
MAX = (4.5, 0.6, 0.17)
EXPONENT = 0.95
CPU_BATCH = 4


def cpu_table(base):
    alpha, beta, gamma = base
    return [{"batch": b, "alpha": round(alpha * b**EXPONENT, 12), "beta": beta,
             "gamma": round(gamma * b**EXPONENT, 12)}
            for b in range(1, CPU_BATCH + 1)]


def profile():
    return {
        "format_version": 1,
        "cpu_avg": cpu_table(AVG),
        "cpu_max": cpu_table(MAX),
        "gpu": {"xi1": XI1, "xi2": XI2},
        "mem": {"mu0": 1.0, "mu1": 0.1},
        "platform": {"m_max": 24, "tau": 0.005, "mem_step": 1},
        "ranges": {"cpu_cores": [0.05, 16.0, 0.05], "cpu_batch": [1, CPU_BATCH],
                   "gpu_batch": [1, 32], "gpu_mem_step": 1},
    }


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def samples(rng):
    cores = [0.25 * k for k in range(1, 33)]
    for which, table in (("avg", cpu_table(AVG)), ("max", cpu_table(MAX))):
        lines = ["batch,cores,latency"]
        for row in table:
            for c in cores:
                clean = row["alpha"] * math.exp(-c / row["beta"]) + row["gamma"]
                noisy = clean * (1.0 + rng.uniform(-0.02, 0.02))
                lines.append(f"{row['batch']},{c:.2f},{noisy:.6f}")
        (ROOT / "samples" / f"vgg19_cpu_{which}.csv").write_text("\n".join(lines) + "\n")
    lines = ["batch,latency"]
    for b in (1, 1, 1, 16, 16, 16):
        lines.append(f"{b},{(XI1 * b + XI2) * (1.0 + rng.uniform(-0.02, 0.02)):.6f}")
    (ROOT / "samples" / "vgg19_gpu.csv").write_text("\n".join(lines) + "\n")
    write_json(ROOT / "samples" / "ground_truth.json",
               {"noise": "uniform +-2% multiplicative", "profile": profile()})


def trace(rng):
    # 60 s of Poisson arrivals for the Table-I apps plus one unknown id.
    rates = {"A1": 5.0, "A2": 10.0, "A3": 20.0, "unknown": 0.5}
    records = []
    for app, rate in rates.items():
        t = rng.expovariate(rate)
        while t < 60.0:
            records.append((t, app))
            t += rng.expovariate(rate)
    records.sort()
    lines = ["timestamp_seconds,app_id"] + [f"{t:.6f},{a}" for t, a in records]
    (ROOT / "traces" / "three_apps_60s.csv").write_text("\n".join(lines) + "\n")


def main():
    rng = random.Random(20240601)
    write_json(ROOT / "profiles" / "vgg19_synthetic.json", profile())
    write_json(ROOT / "workloads" / "three_apps.json", {
        "format_version": 1,
        "profile_path": "../profiles/vgg19_synthetic.json",
        "pricing": {"k1": 1.3e-5, "k2": 1.5e-5, "k3": 1.3e-7},
        "apps": [{"id": "A1", "slo_seconds": 0.5, "rate_rps": 5.0},
                 {"id": "A2", "slo_seconds": 0.8, "rate_rps": 10.0},
                 {"id": "A3", "slo_seconds": 1.0, "rate_rps": 20.0}],
    })
    write_json(ROOT / "workloads" / "single_app.json", {
        "format_version": 1,
        "profile_path": "../profiles/vgg19_synthetic.json",
        "apps": [{"id": "solo", "slo_seconds": 1.0, "rate_rps": 2.0}],
    })
    write_json(ROOT / "workloads" / "gpu_only.json", {
        "format_version": 1,
        "profile_path": "../profiles/vgg19_synthetic.json",
        "apps": [{"id": "strict", "slo_seconds": 0.12, "rate_rps": 20.0}],
    })
    write_json(ROOT / "pricing_default.json", {"k1": 1.3e-5, "k2": 1.5e-5, "k3": 1.3e-7})
    samples(rng)
    trace(rng)


if __name__ == "__main__":
    main()
