"""Regenerates desk_panel.csv: a synthetic monthly panel with fat-tailed
returns for three currencies (USD base, EUR, JPY)."""

import numpy as np
import pandas as pd

rng = np.random.default_rng(20240501)
n = 161
periods = pd.period_range("2002-01", periods=n, freq="M").astype(str)

# common equity, rate and dollar factors with Student-t(4) shocks
def t4(size):
    return rng.standard_t(4, size) / np.sqrt(2.0)

mkt = t4(n)
usd = t4(n)
crash = 118
mkt[crash] = -6.5

cols = {}
cols["eq.USD"] = 0.0140 + 0.040 * (0.80 * mkt + 0.60 * t4(n))
cols["bond.USD"] = 0.0035 + 0.012 * (-0.20 * mkt + 0.98 * t4(n))
cols["eq.EUR"] = 0.0145 + 0.045 * (0.75 * mkt + 0.66 * t4(n))
cols["bond.EUR"] = 0.0030 + 0.011 * (-0.15 * mkt + 0.99 * t4(n))
cols["eq.JPY"] = 0.0150 + 0.050 * (0.65 * mkt + 0.76 * t4(n))
cols["fx.EUR"] = 0.0005 + 0.025 * (-0.70 * usd + 0.71 * t4(n))
cols["fx.JPY"] = 0.0000 + 0.027 * (-0.55 * usd + 0.20 * mkt + 0.81 * t4(n))

def rate(level, amp, phase):
    k = np.arange(n)
    return np.maximum(level + amp * np.sin(2 * np.pi * k / 96 + phase), 0.00005) / 12

cols["rate.USD"] = rate(0.025, 0.015, 0.0)
cols["rate.EUR"] = rate(0.020, 0.012, 0.8)
cols["rate.JPY"] = rate(0.003, 0.002, 1.6)

df = pd.DataFrame(cols, index=pd.Index(periods, name="period"))
df.round(8).to_csv("desk_panel.csv", float_format="%.8f")
