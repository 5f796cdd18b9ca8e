import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from models.schemas import ExperimentConfig  # noqa: E402

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

HIGGS = {"kind": "CurvedHiggs", "couplings": {"omega2": 1.0}}

EXAMPLES = {
    "higgs_sphere": {
        "space": {"epsilon": 1, "d": 3, "r0": 1.0},
        "system": [HIGGS],
        "initial": {"x": [0.3, 0.1, 0.0], "p": [0.0, 0.4, 0.2]},
        "integrator": {"dt": 0.001, "n_steps": 10000, "record_every": 10},
        "generators": [
            {"kind": "HiggsTensor", "indices": [0, 1]},
            {"kind": "HiggsTensor", "indices": [2, 2]},
            {"kind": "Lalphabeta", "indices": [0, 1]},
        ],
    },
    "higgs_closure": {
        "space": {"epsilon": 1, "d": 3, "r0": 1.0},
        "system": [HIGGS],
        "initial": {"x": [0.3, 0.1, 0.0], "p": [0.0, 0.4, 0.2]},
        "integrator": {"dt": 0.0005, "n_steps": 20000},
        "closure": {"t_min": 1.0, "threshold": 0.0001},
    },
    "anisotropic_higgs": {
        "space": {"epsilon": 1, "d": 2, "r0": 1.0},
        "system": [
            HIGGS,
            {"kind": "CurvedAnisotropic", "couplings": {"dOmega2": 0.1}, "t": {"t": [[1.0, 0.0], [0.0, -1.0]]}},
        ],
        "initial": {"x": [0.3, 0.2], "p": [0.1, 0.4]},
        "integrator": {"dt": 0.001, "n_steps": 10000, "record_every": 10},
        "generators": [{"kind": "AnisotropicInvariant"}],
    },
    "anisotropic_negative_control": {
        "space": {"epsilon": 1, "d": 2, "r0": 1.0},
        "system": [
            HIGGS,
            {
                "kind": "CurvedAnisotropic",
                "couplings": {"dOmega2": 0.5},
                "t": {"t": [[1.0, 0.0], [0.0, -0.9]], "allow_invalid": True},
            },
        ],
        "initial": {"x": [0.3, 0.2], "p": [0.1, 0.4]},
        "integrator": {"dt": 0.001, "n_steps": 10000, "record_every": 10},
        "generators": [{"kind": "AnisotropicInvariant"}],
        "expect_fail": True,
    },
    "nonlinear_pseudosphere": {
        "space": {"epsilon": -1, "d": 2, "r0": 1.0},
        "system": [
            HIGGS,
            {"kind": "CurvedNonlinear", "couplings": {"eps_el": 0.05}, "t": {"t": [[1.0, 0.0], [0.0, -1.0]]}},
        ],
        "initial": {"x": [0.2, 0.1], "p": [0.05, 0.3]},
        "integrator": {"dt": 0.001, "n_steps": 10000, "record_every": 10},
        "generators": [{"kind": "NonlinearInvariant", "coefficients": [1.0]}],
    },
    # Stark deformation only: the parabolic correction holds with a fitted 1/2
    "kepler_stark_sphere": {
        "space": {"epsilon": 1, "d": 3, "r0": 1.0},
        "system": [
            {"kind": "CurvedKepler", "couplings": {"gamma": 1.0}},
            {"kind": "CurvedKeplerDeformed", "couplings": {"eps_el": 0.1}},
        ],
        "initial": {"x": [0.0, 0.0, 0.5], "p": [1.1, 0.0, 0.0]},
        "integrator": {"dt": 0.0001, "n_steps": 30000, "record_every": 20},
        "generators": [{"kind": "KeplerDeformedInvariant"}],
    },
    "kepler_closure_sphere": {
        "space": {"epsilon": 1, "d": 3, "r0": 1.0},
        "system": [{"kind": "CurvedKepler", "couplings": {"gamma": 1.0}}],
        "initial": {"x": [0.0, 0.0, 0.5], "p": [1.1, 0.0, 0.0]},
        "integrator": {"dt": 0.0001, "n_steps": 40000, "record_every": 10},
        "closure": {"t_min": 0.5, "threshold": 0.0001},
    },
    "flat_oscillator_closure": {
        "space": "flat 2",
        "system": [{"kind": "FlatOscillator", "couplings": {"omega2": 1.0}}],
        "initial": {"x": [1.0, 0.0], "p": [0.0, 0.5]},
        "integrator": {"dt": 0.001, "n_steps": 8000},
        "closure": {"t_min": 1.0, "threshold": 1e-05},
    },
    "ks_pure": {
        "space": "flat 4",
        "system": [{"kind": "FlatOscillator", "couplings": {"omega2": 1.0}}],
        "initial": {"x": [0.6, 0.0, 0.0, 0.0], "p": [0.0, 0.0, 0.3, 0.0]},
        "integrator": {"dt": 5e-05, "n_steps": 60000, "record_every": 20},
        "reduction": {"kind": "KS"},
    },
    "ks_anisotropic": {
        "space": "flat 4",
        "system": [
            {"kind": "FlatOscillator", "couplings": {"omega2": 1.0}},
            {"kind": "FlatAnisotropic", "couplings": {"dOmega2": 0.2}},
        ],
        "initial": {"x": [0.6, 0.0, 0.0, 0.0], "p": [0.0, 0.0, 0.3, 0.0]},
        "integrator": {"dt": 5e-05, "n_steps": 60000, "record_every": 20},
        "reduction": {"kind": "KS"},
    },
    "ks_quartic": {
        "space": "flat 4",
        "system": [
            {"kind": "FlatOscillator", "couplings": {"omega2": 1.0}},
            {"kind": "FlatQuartic", "couplings": {"eps_el": 0.02}},
        ],
        "initial": {"x": [0.6, 0.0, 0.0, 0.0], "p": [0.0, 0.0, 0.3, 0.0]},
        "integrator": {"dt": 5e-05, "n_steps": 60000, "record_every": 20},
        "reduction": {"kind": "KS"},
    },
    "ks_monopole": {
        "space": "flat 4",
        "system": [{"kind": "FlatOscillator", "couplings": {"omega2": 1.0}}],
        "initial": {"x": [0.6, 0.0, 0.0, 0.0], "p": [0.0, 0.0, 0.3, 0.0]},
        "integrator": {"dt": 5e-05, "n_steps": 60000, "record_every": 20},
        "reduction": {"kind": "KS", "s": 0.1},
    },
    "levi_civita": {
        "space": "flat 2",
        "system": [{"kind": "FlatOscillator", "couplings": {"omega2": 1.0}}],
        "initial": {"x": [0.6, 0.3], "p": [0.1, 0.5]},
        "integrator": {"dt": 5e-05, "n_steps": 60000, "record_every": 20},
        "reduction": {"kind": "LeviCivita"},
    },
    "gradcheck_all": {
        "space": {"epsilon": 1, "d": 3, "r0": 1.0},
        "gradcheck": {"n_points": 100},
    },
}


def seed_configs(target: Path = CONFIG_DIR):
    """Validate every example config and write it as configs/<name>.json"""
    target.mkdir(parents=True, exist_ok=True)
    for name, raw in EXAMPLES.items():
        ExperimentConfig.model_validate(raw)
        path = target / f"{name}.json"
        path.write_text(json.dumps(raw, indent=2) + "\n")
        print(f"Wrote {path}")

    print("Example configs written successfully!")


if __name__ == "__main__":
    seed_configs()
