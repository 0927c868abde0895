"""Quick check that the extension imports and its main entry points work."""

import json

import pon_phy_py as pp


def main():
    assert pp.presets() == ["ofdm-t1", "ufofdm-t1", "gfdm-t1"]
    cfg = json.loads(pp.preset_json("gfdm-t1"))
    assert cfg["modem"]["waveform"] == "gfdm"

    try:
        pp.validate_config('{"preset": "ofdm-t1", "guard_band_hz": [-1]}')
    except ValueError as e:
        assert "guard" in str(e)
    else:
        raise AssertionError("negative guard accepted")

    for name in pp.presets():
        modem = pp.Modem(name)
        per_frame = modem.rows_per_frame * modem.n_active
        symbols = pp.qam16_symbols(3, 4 * per_frame)
        x = modem.modulate(symbols)
        assert len(x) == 4 * modem.frame_len
        y = modem.demodulate(x, symbols[:per_frame], 1)
        assert pp.evm_percent(y, symbols[per_frame:]) < 1e-6, name

    small = json.dumps({
        "preset": "ufofdm-t1",
        "n_frames": 4,
        "frames_per_trial": 2,
        "training_frames": 1,
        "rx_power_dbm": [-16],
    })
    rows = pp.run(small, workers=1, seed=5)
    assert {r["band_id"] for r in rows} == {"1", "2", "3", "pam"}
    assert all(r["seed"] == 5 and r["version"] == pp.VERSION for r in rows)
    assert rows == pp.run(small, workers=2, seed=5)

    freqs, psd = pp.welch_psd(x, modem.sample_rate, 1024)
    assert len(freqs) == len(psd) == 1024
    assert abs(pp.qam16_ber_theory(16.54) - 1e-3) < 1e-4
    print("smoke test passed:", pp.VERSION)


if __name__ == "__main__":
    main()
