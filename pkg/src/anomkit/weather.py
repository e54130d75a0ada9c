"""Synthetic road-weather corpus generator.

Stands in for a proprietary station archive: each station's road surface
temperature follows a seasonal sinusoid plus a diurnal sinusoid plus a
station offset plus AR(1) noise, with physically plausible companion
channels derived from it. Everything is a pure function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TICK_SECONDS, TimeSeriesFrame
from .errors import ConfigError

# 2023-01-01T00:00:00Z
DEFAULT_START_EPOCH = 1672531200

TWO_PI = 2.0 * np.pi


@dataclass
class WeatherConfig:
    base_temp: float = 4.0
    seasonal_amplitude: float = 12.0
    diurnal_amplitude: float = 6.0
    station_offset_scale: float = 3.0
    ar_coeff: float = 0.9
    noise_scale: float = 0.4
    start_epoch: int = DEFAULT_START_EPOCH


def road_temp_model(hours: np.ndarray, cfg: WeatherConfig) -> np.ndarray:
    """Deterministic part of the road temperature (no offset, no noise).

    Seasonal peak around mid-July (day 197), diurnal peak at 14:00.
    """
    doy = hours / 24.0
    seasonal = cfg.seasonal_amplitude * np.cos(TWO_PI * (doy - 197.0) / 365.0)
    diurnal = cfg.diurnal_amplitude * np.cos(TWO_PI * ((hours % 24.0) - 14.0) / 24.0)
    return cfg.base_temp + seasonal + diurnal


def _ar1(rng: np.random.Generator, n: int, coeff: float, scale: float) -> np.ndarray:
    eps = rng.normal(0.0, scale, size=n) if scale > 0 else np.zeros(n)
    out = np.empty(n)
    prev = 0.0
    for i in range(n):
        prev = coeff * prev + eps[i]
        out[i] = prev
    return out


def gen_weather_corpus(
    n_stations: int,
    days: int,
    seed: int,
    cfg: WeatherConfig | None = None,
) -> list[TimeSeriesFrame]:
    """Generate ``n_stations`` frames of ``days`` days at 30-minute ticks."""
    if n_stations < 1:
        raise ConfigError("n_stations must be >= 1")
    if days < 1:
        raise ConfigError("days must be >= 1")
    cfg = cfg or WeatherConfig()
    n = days * (86400 // TICK_SECONDS)
    timestamps = cfg.start_epoch + np.arange(n, dtype=np.int64) * TICK_SECONDS
    hours = (timestamps - cfg.start_epoch) / 3600.0 + (
        cfg.start_epoch % 86400
    ) / 3600.0

    frames = []
    for s in range(n_stations):
        rng = np.random.default_rng(np.random.SeedSequence((seed, s)))
        offset = (
            rng.normal(0.0, cfg.station_offset_scale)
            if cfg.station_offset_scale > 0
            else 0.0
        )
        # One regional weather disturbance drives every thermal channel, so
        # the channels carry redundant information about each other; each
        # channel adds a smaller private term on top.
        weather = _ar1(rng, n, cfg.ar_coeff, cfg.noise_scale)
        base = road_temp_model(hours, cfg) + offset
        t_road = base + 0.9 * weather + _ar1(rng, n, 0.5, 0.4 * cfg.noise_scale)
        # Air leads road with a damped diurnal swing; subsurface is heavily
        # smoothed; pressure and humidity get their own slow oscillations.
        t_air = (
            cfg.base_temp
            + offset
            + cfg.seasonal_amplitude * np.cos(TWO_PI * (hours / 24.0 - 197.0) / 365.0)
            + 0.6 * cfg.diurnal_amplitude * np.cos(TWO_PI * ((hours % 24.0) - 15.0) / 24.0)
            + weather
            + _ar1(rng, n, 0.5, 0.4 * cfg.noise_scale)
        )
        t_sub = (
            cfg.base_temp
            + 2.0
            + offset
            + 0.8 * cfg.seasonal_amplitude * np.cos(TWO_PI * (hours / 24.0 - 215.0) / 365.0)
            + 0.15 * cfg.diurnal_amplitude * np.cos(TWO_PI * ((hours % 24.0) - 17.0) / 24.0)
            + 0.55 * weather
            + _ar1(rng, n, 0.5, 0.2 * cfg.noise_scale)
        )
        pressure = (
            1013.0
            + 6.0 * np.sin(TWO_PI * hours / 240.0 + s)
            + _ar1(rng, n, cfg.ar_coeff, 2.0 * cfg.noise_scale)
        )
        humidity = np.clip(
            70.0
            - 1.5 * (t_air - cfg.base_temp)
            + _ar1(rng, n, cfg.ar_coeff, 6.0 * cfg.noise_scale),
            5.0,
            100.0,
        )
        frames.append(
            TimeSeriesFrame(
                station_id=f"st{s + 1:02d}",
                timestamps=timestamps.copy(),
                channels={
                    "t_air": t_air,
                    "t_road": t_road,
                    "t_sub": t_sub,
                    "pressure": pressure,
                    "humidity": humidity,
                },
            )
        )
    return frames
