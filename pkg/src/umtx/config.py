"""Pipeline configuration: INI text with strict key validation.

Two presets bundle coherent defaults: "paper" carries the published
hyperparameters (window 5, dim 300, 10 negatives, 5 epochs, 200k/400k/400k
vocabulary caps, 100 candidates, 5-gram LM), "desk" scales everything down
for laptop-sized experiments. Explicit keys override the preset. Unknown
sections or keys are rejected outright so typos cannot silently fall back
to defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}

# section -> key -> (type, desk default, paper default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "global": {
        "seed": (int, 1, 1),
        "workers": (int, 1, 1),
        "src_label": (str, "a", "a"),
        "tgt_label": (str, "b", "b"),
        "preset": (str, "desk", "paper"),
        "export_direction": (str, "", ""),  # empty = tgt-to-src, mirroring cs->de
    },
    "data": {
        "generate_cipher": (bool, True, False),
        "cipher_sentences": (int, 2000, 20000),
        "cipher_vocab": (int, 120, 200),
        "cipher_dev": (int, 150, 400),
        "cipher_test": (int, 150, 400),
        "mono_src": (str, "", ""),
        "mono_tgt": (str, "", ""),
        "dev": (str, "", ""),
        "test": (str, "", ""),
    },
    "preprocess": {
        "min_len": (int, 3, 3),
        "max_len": (int, 80, 80),
        "truecase": (bool, False, True),
        "langid": (bool, False, False),
        "langid_order": (int, 3, 3),
    },
    "vocab": {
        "cap1": (int, 2000, 200000),
        "cap2": (int, 4000, 400000),
        "cap3": (int, 4000, 400000),
    },
    "embed": {
        "window": (int, 3, 5),
        "dim": (int, 32, 300),
        "negatives": (int, 5, 10),
        "epochs": (int, 3, 5),
        "learning_rate": (float, 0.025, 0.025),
    },
    "map": {
        "seed_mode": (str, "frequency", "identical"),
        "seed_pairs": (int, 40, 25),
        "csls_k": (int, 10, 10),
        "max_iters": (int, 50, 50),
        "tol": (float, 1e-6, 1e-6),
        # learn the rotation on the unigram block only; rare bigram/trigram
        # rows are noisy and drag the self-learning into local optima
        "learn_unigrams": (bool, True, False),
    },
    "table": {
        "k": (int, 20, 100),
        "temperature": (float, 0.1, 0.1),
    },
    "lm": {
        "order": (int, 3, 5),
    },
    "decode": {
        "beam": (int, 10, 100),
        "distortion_limit": (int, 0, 0),
        "unk_cost": (float, 10.0, 10.0),
    },
    "tune": {
        "initial": (bool, True, True),
        "mode": (str, "authentic", "authentic"),  # authentic | synthetic | none
        "rounds": (int, 2, 5),
        "nbest": (int, 20, 50),
        "restarts": (int, 8, 20),
        "synthetic_dev_size": (int, 150, 10000),
    },
    "backtrans": {
        "iterations": (int, 2, 6),
        "subset": (int, 1000, 2000000),
        "em_iterations": (int, 5, 5),
        "post_distortion_limit": (int, 0, 6),
        "divergence_delta": (float, 3.0, 3.0),
    },
    "fix": {
        "strip": (bool, True, True),
        "profile": (str, "czech", "czech"),
        "unk_token": (str, "unk", "unk"),
        "reorder_window": (int, 5, 5),
        "lev_threshold": (int, 3, 3),
        "quotes": (bool, True, True),
    },
}


@dataclass
class PipelineConfig:
    values: dict[str, dict[str, object]] = field(default_factory=dict)

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.values[section]

    def get(self, section: str, key: str):
        return self.values[section][key]

    def stage_dict(self, *sections: str) -> dict[str, object]:
        """Flat {section.key: value} view used for stage config hashing."""
        out: dict[str, object] = {}
        for section in sections:
            for key, value in self.values[section].items():
                out["%s.%s" % (section, key)] = value
        return out

    def dump(self) -> str:
        lines = []
        for section in sorted(self.values):
            lines.append("[%s]" % section)
            for key in sorted(self.values[section]):
                lines.append("%s = %s" % (key, self.values[section][key]))
            lines.append("")
        return "\n".join(lines)


def _convert(raw: str, typ, section: str, key: str):
    if typ is bool:
        if raw.lower() not in _BOOL:
            raise ValueError("[%s] %s: expected a boolean, got %r" % (section, key, raw))
        return _BOOL[raw.lower()]
    try:
        return typ(raw)
    except ValueError:
        raise ValueError("[%s] %s: expected %s, got %r" % (section, key, typ.__name__, raw)) from None


def default_config(preset: str = "desk") -> PipelineConfig:
    if preset not in ("desk", "paper"):
        raise ValueError("unknown preset %r" % preset)
    idx = 1 if preset == "desk" else 2
    values = {
        section: {key: spec[idx] for key, spec in keys.items()} for section, keys in SCHEMA.items()
    }
    values["global"]["preset"] = preset
    return PipelineConfig(values)


def load_config(path: str | Path) -> PipelineConfig:
    parser = configparser.ConfigParser(interpolation=None)
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    preset = parser.get("global", "preset", fallback="desk")
    config = default_config(preset)
    for section in parser.sections():
        if section not in SCHEMA:
            raise ValueError("unknown config section [%s]" % section)
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ValueError("unknown key %r in section [%s]" % (key, section))
            config.values[section][key] = _convert(raw, SCHEMA[section][key][0], section, key)
    return config
