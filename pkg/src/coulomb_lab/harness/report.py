"""Markdown summary mapping each result probed to its numeric outcome."""

import glob
import json
import os
from importlib import resources

from .acceptance import CRITERIA


def preset_path(name):
    return str(resources.files("coulomb_lab") / "presets" / name)


def preset_coverage():
    """Criterion ids reproduced by the packaged presets (acceptance.json)."""
    with open(preset_path("acceptance.json")) as fh:
        doc = json.load(fh)
    return sorted(int(k) for k in doc["criteria"])


def _find(inputs, name):
    hits = []
    for root in inputs:
        if os.path.isfile(root) and os.path.basename(root) == name:
            hits.append(root)
        elif os.path.isdir(root):
            hits += glob.glob(os.path.join(root, name)) + glob.glob(os.path.join(root, "*", name))
    return sorted(set(hits), key=os.path.getmtime)


def _fmt(v):
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (int, float)):
        return f"{v:.4g}"
    return str(v)


def collect_criteria(inputs):
    """Latest result per criterion id over every acceptance.json found."""
    latest = {}
    for path in _find(inputs, "acceptance.json"):
        with open(path) as fh:
            for r in json.load(fh)["criteria"]:
                latest[int(r["id"])] = dict(r, source=os.path.relpath(path))
    return latest


def render(inputs):
    crit = collect_criteria(inputs)
    lines = ["# Coulomb lab report", "", "## Acceptance criteria", "",
             "| # | criterion | result probed | outcome | checks (value vs threshold) | runtime (s) |",
             "|---|---|---|---|---|---|"]
    for k, (title, probes) in CRITERIA.items():
        r = crit.get(k)
        if r is None:
            lines.append(f"| {k} | {title} | {probes} | NOT RUN | | |")
            continue
        checks = "<br>".join(f"{'ok' if c['passed'] else 'FAIL'} {c['name']}: {_fmt(c['value'])} vs {_fmt(c['threshold'])}"
                             for c in r["checks"] if c["name"] != "runtime_seconds")
        lines.append(f"| {k} | {title} | {probes} | {'PASS' if r['passed'] else 'FAIL'} | {checks} | "
                     f"{r['runtime']:.1f} / {r['budget']} |")
    notes = [(k, n) for k, r in sorted(crit.items()) for n in r.get("notes", [])]
    if notes:
        lines += ["", "### Notes", ""] + [f"- criterion {k}: {n}" for k, n in notes]
    verify = _find(inputs, "verify.json")
    if verify:
        lines += ["", "## Identity and inequality suite", "", "| group | contract | value | threshold | outcome |",
                  "|---|---|---|---|---|"]
        with open(verify[-1]) as fh:
            for g, cs in json.load(fh).items():
                lines += [f"| {g} | {c['name']} | {_fmt(c['value'])} | {_fmt(c['threshold'])} | "
                          f"{'PASS' if c['passed'] else 'FAIL'} |" for c in cs]
    estimates = _find(inputs, "index.json")
    if estimates:
        lines += ["", "## Estimator reports", ""]
        for idx in estimates:
            with open(idx) as fh:
                doc = json.load(fh)
            d = os.path.relpath(os.path.dirname(idx))
            lines.append(f"- `{d}` (N={doc['N']}, d={doc['dim']}, {doc['samples']} samples): "
                         + ", ".join(f"{r['estimator']} ([json]({os.path.join(d, r['json'])}), "
                                     f"[csv]({os.path.join(d, r['csv'])}))" for r in doc["reports"]))
    cov = preset_coverage()
    missing = sorted(set(CRITERIA) - set(cov))
    lines += ["", "## Preset coverage", "",
              f"The packaged acceptance preset reproduces {len(cov)} of {len(CRITERIA)} criteria"
              + (f"; missing: {missing}." if missing else ".")]
    return "\n".join(lines) + "\n"


def write_report(inputs, path):
    text = render(inputs)
    with open(path, "w") as fh:
        fh.write(text)
    return path
