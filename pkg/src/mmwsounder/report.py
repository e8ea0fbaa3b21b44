"""Delimited product tables, run reports, and figure rendering.

Every processing product is written twice: a tab-separated table for
downstream tooling and a rendered PNG next to it for eyeballing. Tables
carry a header row; power columns are dB, delays are ns, angles are
degrees. Figures use the Agg backend so the CLI never needs a display.
"""

from __future__ import annotations

import configparser
import io as _stringio
import os
import tempfile

import numpy as np

from .processing import DirectionalPdp, PasResult


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".mmws-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path: str, columns, rows) -> None:
    """Tab-separated table with one header row."""
    lines = ["\t".join(str(c) for c in columns)]
    for row in rows:
        lines.append(
            "\t".join(
                f"{v:.6g}" if isinstance(v, (int, float, np.floating)) else str(v)
                for v in row
            )
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_table(path: str):
    """Header row plus rows of strings; numeric parsing is the caller's."""
    with open(path, encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    header = lines[0].split("\t")
    return header, [ln.split("\t") for ln in lines[1:]]


def write_run_report(path: str, config: dict[str, dict[str, str]], results: dict[str, str]) -> None:
    """INI run report: the resolved config verbatim (prefixed sections)
    plus a results section."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    for section, kv in config.items():
        name = f"config_{section}"
        cp.add_section(name)
        for k, v in kv.items():
            cp.set(name, k, str(v))
    cp.add_section("results")
    for k, v in results.items():
        cp.set("results", k, str(v))
    buf = _stringio.StringIO()
    cp.write(buf)
    _atomic_write_text(path, buf.getvalue())


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _db(p, floor_db=-250.0):
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(p)
    return np.maximum(out, floor_db)


def render_sector_pdp(path: str, delays_s: np.ndarray, power: np.ndarray, title: str) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(delays_s * 1e9, _db(power), lw=0.8)
    ax.set_xlabel("delay [ns]")
    ax.set_ylabel("power [dB]")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_pas(path: str, pas_result: PasResult, title: str) -> None:
    plt = _pyplot()
    order = np.argsort(pas_result.rx_angles_global, kind="stable")
    power = pas_result.power[:, order]
    angles = pas_result.rx_angles_global[order]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    im = ax.imshow(
        _db(power),
        aspect="auto",
        origin="lower",
        extent=(angles[0], angles[-1], pas_result.tx_angles[0], pas_result.tx_angles[-1]),
    )
    fig.colorbar(im, ax=ax, label="power [dB]")
    ax.set_xlabel("RX azimuth, global [deg]")
    ax.set_ylabel("TX azimuth [deg]")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_padp(path: str, delays_s: np.ndarray, angles: np.ndarray, profile: np.ndarray, side: str, title: str) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    im = ax.imshow(
        _db(profile),
        aspect="auto",
        origin="lower",
        extent=(delays_s[0] * 1e9, delays_s[-1] * 1e9, angles[0], angles[-1]),
    )
    fig.colorbar(im, ax=ax, label="power [dB]")
    ax.set_xlabel("delay [ns]")
    ax.set_ylabel(f"{side} azimuth [deg]")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def sector_pdp_table(path: str, delays_s: np.ndarray, power: np.ndarray) -> None:
    write_table(
        path,
        ("delay_ns", "power_db"),
        ((d * 1e9, p) for d, p in zip(delays_s, _db(power))),
    )


def pas_table(path: str, pas_result: PasResult) -> None:
    order = np.argsort(pas_result.rx_angles_global, kind="stable")
    header = ["tx_az_deg"] + [
        f"rx_{pas_result.rx_angles_global[j]:.6g}" for j in order
    ]
    rows = []
    for i, tx in enumerate(pas_result.tx_angles):
        rows.append([tx] + list(_db(pas_result.power[i, order])))
    write_table(path, header, rows)


def padp_table(path: str, delays_s: np.ndarray, angles: np.ndarray, profile: np.ndarray) -> None:
    header = ["angle_deg"] + [f"{d * 1e9:.6g}" for d in delays_s]
    rows = []
    for i, ang in enumerate(angles):
        rows.append([ang] + list(_db(profile[i])))
    write_table(path, header, rows)


def pdp_products(out_dir: str, tag: str, pdp: DirectionalPdp, sector: np.ndarray) -> list[str]:
    """Sector PDP and both PADP sides for one orientation: tables + figures."""
    from .processing import padp

    delays = pdp.delays
    written = []

    table = os.path.join(out_dir, f"sector_pdp_{tag}.tsv")
    sector_pdp_table(table, delays, sector)
    fig = os.path.join(out_dir, f"sector_pdp_{tag}.png")
    render_sector_pdp(fig, delays, sector, f"sector PDP {tag}")
    written += [table, fig]

    rx_profile, tx_profile = padp(pdp)
    for side, angles, profile in (
        ("rx", pdp.rx_angles, rx_profile),
        ("tx", pdp.tx_angles, tx_profile),
    ):
        table = os.path.join(out_dir, f"padp_{side}_{tag}.tsv")
        padp_table(table, delays, angles, profile)
        fig = os.path.join(out_dir, f"padp_{side}_{tag}.png")
        render_padp(fig, delays, angles, profile, side.upper(), f"PADP {side} {tag}")
        written += [table, fig]
    return written
