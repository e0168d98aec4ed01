"""Training / evaluation harness: datasets, runs, records, grid search.

A run is fully described by a :class:`RunConfig`; re-running the same
config and seed on one platform reproduces every metric bit for bit
(full-batch by default, seeded shuffling otherwise, deterministic
aggregation order). Metrics stream as JSON lines, summaries as JSON, and
learned potentials are dumped as CSV for external plotting.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .errors import NaNLoss
from .fileio import save_checkpoint, write_csv_matrix
from .models import (ModelConfig, MuChebNet, accuracy, context_for,
                     cross_entropy_loss, log10_mse, mse_loss)
from .tasks import TaskInstance, gen_barbell, gen_graph_property, gen_ring_routing


@dataclass
class RunConfig:
    task: dict
    model: dict
    optim: dict = field(default_factory=dict)
    epochs: int = 200
    seeds: list = field(default_factory=lambda: [0])
    patience: int = 50
    eval_every: int = 1
    batch_size: int | None = None
    out: str | None = None

    def to_dict(self) -> dict:
        return {"task": self.task, "model": self.model, "optim": self.optim,
                "epochs": self.epochs, "seeds": list(self.seeds),
                "patience": self.patience, "eval_every": self.eval_every,
                "batch_size": self.batch_size, "out": self.out}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class TaskData:
    """Split instances plus everything the loop needs to know about them."""

    train: list
    val: list
    test: list
    loss_kind: str        # "mse" | "cross-entropy"
    metric: str           # "nmse" | "log10_mse" | "accuracy" | "mse"
    in_dim: int
    out_dim: int
    readout: str
    shared_graph: bool


def _rebind_shared_graph(splits: list[list[TaskInstance]]) -> None:
    """Fixed-topology tasks regenerate an identical graph per instance;
    share one object so operator constants are computed once."""
    g0 = splits[0][0].graph
    for split in splits:
        for inst in split:
            assert np.array_equal(inst.graph.edges, g0.edges)
            inst.graph = g0


def build_dataset(task_cfg: dict, data_seed: int | None = None) -> TaskData:
    cfg = dict(task_cfg)
    name = cfg.pop("name")
    seed = int(cfg.pop("data_seed", 777) if data_seed is None else data_seed)
    counts = cfg.pop("counts", None)

    if name == "barbell":
        k_path = int(cfg.pop("k_path", 4))
        if "n_clique" in cfg:
            n_clique = int(cfg.pop("n_clique"))
        else:
            total = int(cfg.pop("n"))
            if (total - k_path) % 2:
                raise ValueError(f"total size {total} minus bridge {k_path} must be even")
            n_clique = (total - k_path) // 2
        counts = counts or [64, 16, 32]
        make = lambda s: gen_barbell(n_clique, k_path, seed=s)
        splits = _make_splits(make, counts, seed)
        _rebind_shared_graph(splits)
        return TaskData(*splits, loss_kind="mse", metric="nmse", in_dim=1,
                        out_dim=1, readout="node", shared_graph=True)

    if name == "ring":
        n = int(cfg.pop("n", 16))
        classes = int(cfg.pop("classes", 10))
        noise = float(cfg.pop("noise_scale", 1.0))
        counts = counts or [256, 64, 128]
        make = lambda s: gen_ring_routing(n, num_classes=classes, seed=s,
                                          noise_scale=noise)
        splits = _make_splits(make, counts, seed)
        _rebind_shared_graph(splits)
        return TaskData(*splits, loss_kind="cross-entropy", metric="accuracy",
                        in_dim=classes, out_dim=classes, readout="node",
                        shared_graph=True)

    if name == "graph-property":
        prop = cfg.pop("property", "sssp")
        n_range = cfg.pop("n_range", [15, 25])
        model = cfg.pop("model", "erdos-renyi")
        p = float(cfg.pop("p", 0.3))
        m_attach = int(cfg.pop("m_attach", 2))
        counts = counts or [512, 64, 128]
        make = lambda s: gen_graph_property(prop, n_range, seed=s, model=model,
                                            p=p, m_attach=m_attach)
        splits = _make_splits(make, counts, seed)
        readout = "graph" if prop == "diameter" else "node"
        in_dim = 3 if prop == "sssp" else 2
        return TaskData(*splits, loss_kind="mse", metric="log10_mse",
                        in_dim=in_dim, out_dim=1, readout=readout,
                        shared_graph=False)

    raise ValueError(f"unknown task {name!r}")


def _make_splits(make, counts, seed):
    offsets = (0, 1_000_000, 2_000_000)
    return [[make(seed * 10_000_000 + off + i) for i in range(count)]
            for off, count in zip(offsets, counts)]


# --- loss / metric evaluation ---

def _stack(instances):
    x = np.stack([inst.X for inst in instances])
    return x


def _batch_loss(model: MuChebNet, data: TaskData, instances, tape: ad.Tape):
    """Forward + loss for one batch; returns (loss tensor, predictions, mus)."""
    if data.shared_graph:
        ctx = context_for(instances[0].graph)
        pred, mu = model.forward(tape, ctx, _stack(instances))
        if data.loss_kind == "cross-entropy":
            query = instances[0].meta["query"]
            logits = ad.reshape(ad.take_nodes(pred, [query]),
                                (len(instances), data.out_dim))
            labels = np.array([int(inst.y) for inst in instances])
            return cross_entropy_loss(logits, labels), pred, mu
        y = np.stack([inst.y for inst in instances])
        return mse_loss(pred, y, instances[0].mask), pred, mu
    parts = []
    preds, mus = [], []
    for inst in instances:
        pred, mu = model.forward(tape, context_for(inst.graph), inst.X)
        parts.append(mse_loss(pred, inst.y, inst.mask))
        preds.append(pred)
        mus.append(mu)
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total * (1.0 / len(parts)), preds, mus


def evaluate(model: MuChebNet, data: TaskData, instances) -> dict:
    """Loss plus task metric on a list of instances (no gradients kept)."""
    tape = ad.Tape()
    loss, pred, mu = _batch_loss(model, data, instances, tape)
    out = {"loss": float(loss.data)}
    if data.loss_kind == "cross-entropy":
        query = instances[0].meta["query"]
        logits = pred.data[:, query, :]
        labels = np.array([int(inst.y) for inst in instances])
        out["accuracy"] = accuracy(logits, labels)
        out.update(_mu_contrast(mu, instances))
    elif data.metric == "nmse":
        var = instances[0].meta["target_variance"]
        out["mse"] = out["loss"]
        out["nmse"] = out["loss"] / var
    else:
        out["mse"] = out["loss"]
        out["log10_mse"] = log10_mse(out["loss"])
    return out


def _mu_contrast(mu, instances) -> dict:
    """Mean learned potential on clean vs noisy ring paths."""
    if mu is None:
        return {}
    vals = mu.data if mu.data.ndim == 2 else mu.data[None]
    clean, noisy = [], []
    for row, inst in zip(vals, instances):
        clean.append(row[inst.meta["clean_path"]].mean())
        noisy.append(row[inst.meta["noisy_path"]].mean())
    return {"mu_clean_mean": float(np.mean(clean)),
            "mu_noisy_mean": float(np.mean(noisy)),
            "mu_contrast": float(np.mean(clean) - np.mean(noisy))}


# --- the training loop ---

def train_run(config: RunConfig, seed: int, outdir: Path | None = None) -> dict:
    """Train one seed; returns the run record (and writes it when outdir set)."""
    t0 = time.time()
    data = build_dataset(config.task)
    mcfg = ModelConfig.from_dict(config.model)
    mcfg.out_dim = data.out_dim
    mcfg.readout = data.readout
    model = MuChebNet(data.in_dim, mcfg, seed=seed)

    opt = dict(config.optim)
    lr = float(opt.pop("lr", 1e-2))
    hyper = {"beta1": float(opt.pop("beta1", 0.9)),
             "beta2": float(opt.pop("beta2", 0.999)),
             "eps": float(opt.pop("eps", 1e-8)),
             "weight_decay": float(opt.pop("weight_decay", 0.0))}
    state = ad.AdamState(model.params)

    history = []
    best = {"val_loss": np.inf, "epoch": -1, "params": model.snapshot()}
    stale = 0
    rng = np.random.default_rng(np.random.PCG64(np.random.SeedSequence([seed, 0xC0FFEE])))

    epoch = -1
    for epoch in range(config.epochs):
        order = rng.permutation(len(data.train))
        bs = config.batch_size or len(data.train)
        train_loss = 0.0
        nb = 0
        for start in range(0, len(order), bs):
            batch = [data.train[i] for i in order[start:start + bs]]
            tape = ad.Tape()
            loss, _, _ = _batch_loss(model, data, batch, tape)
            if not np.isfinite(loss.data):
                raise NaNLoss(f"non-finite training loss at epoch {epoch}")
            grads = {t.name: g for t, g in ad.backward(tape, loss).items()}
            ad.adam_step(model.params, grads, state, lr, **hyper)
            ad.check_finite(model.params, f"epoch {epoch}")
            train_loss += float(loss.data)
            nb += 1
        train_loss /= max(nb, 1)

        if epoch % config.eval_every == 0:
            val = evaluate(model, data, data.val)
            history.append({"epoch": epoch, "train_loss": train_loss, **{
                f"val_{k}": v for k, v in val.items()}})
            if val["loss"] < best["val_loss"] - 1e-12:
                best = {"val_loss": val["loss"], "epoch": epoch,
                        "params": model.snapshot()}
                stale = 0
            else:
                stale += config.eval_every
                if stale >= config.patience:
                    break

    model.load_params(best["params"])
    record = {
        "config_hash": config.config_hash(),
        "seed": seed,
        "epochs_run": epoch + 1,
        "best_epoch": best["epoch"],
        "train": {"loss": history[-1]["train_loss"] if history else None},
        "val": evaluate(model, data, data.val) if data.val else {},
        "test": evaluate(model, data, data.test) if data.test else {},
        "wall_time_s": time.time() - t0,
    }

    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "metrics.jsonl", "w") as fh:
            for row in history:
                fh.write(json.dumps(row) + "\n")
        ckpt = save_checkpoint(outdir / "checkpoint", model.params,
                               meta={"model": mcfg.to_dict(),
                                     "in_dim": data.in_dim, "seed": seed})
        record["checkpoint"] = str(ckpt)
        (outdir / "config.json").write_text(json.dumps(config.to_dict(), indent=2))
        _dump_mu(model, data, outdir)
        (outdir / "record.json").write_text(json.dumps(record, indent=2))
    return record


def _dump_mu(model: MuChebNet, data: TaskData, outdir: Path,
             max_instances: int = 4) -> None:
    if model.parameterizer is None or not data.test:
        return
    rows = []
    for inst in data.test[:max_instances]:
        tape = ad.Tape()
        _, mu = model.forward(tape, context_for(inst.graph), inst.X)
        rows.append(mu.data.reshape(-1))
    if len({r.size for r in rows}) == 1:
        write_csv_matrix(np.stack(rows).T, outdir / "mu_test_instances.csv")
    else:  # variable graph sizes: one file per instance
        for i, r in enumerate(rows):
            write_csv_matrix(r, outdir / f"mu_test_instance_{i:02d}.csv")


def _train_seed_worker(config_dict: dict, seed: int, outdir: str | None) -> dict:
    cfg = RunConfig.from_dict(config_dict)
    return train_run(cfg, seed, Path(outdir) if outdir else None)


def train_multi(config: RunConfig, parallel: bool = False) -> dict:
    """Train every seed in the config; aggregates mean/std per metric."""
    outbase = Path(config.out) if config.out else None
    jobs = [(config.to_dict(), int(s),
             str(outbase / f"seed{s}") if outbase else None)
            for s in config.seeds]
    if parallel and len(jobs) > 1:
        workers = int(os.environ.get("BE_SPECTRAL_THREADS", os.cpu_count() or 1))
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            records = list(pool.map(_train_seed_worker, *zip(*jobs)))
    else:
        records = [_train_seed_worker(*j) for j in jobs]

    aggregate = {}
    keys = records[0]["test"].keys() if records and records[0]["test"] else []
    for key in keys:
        vals = np.array([r["test"][key] for r in records], dtype=np.float64)
        aggregate[key] = {"mean": float(vals.mean()),
                          "std": float(vals.std(ddof=0))}
    summary = {"config_hash": config.config_hash(),
               "seeds": [int(s) for s in config.seeds],
               "per_seed": records, "aggregate": aggregate}
    if outbase:
        outbase.mkdir(parents=True, exist_ok=True)
        (outbase / "summary.json").write_text(json.dumps(summary, indent=2))
        (outbase / "config.json").write_text(json.dumps(config.to_dict(), indent=2))
    return summary


def grid_search(base: RunConfig, grid: dict, select: str = "loss") -> dict:
    """Exhaustive sweep over ``grid`` (dotted keys into the config dict).

    Trains the first seed per point and returns all results plus the best
    point by validation ``select`` (lower is better).
    """
    import itertools

    keys = sorted(grid)
    results = []
    for values in itertools.product(*(grid[k] for k in keys)):
        d = base.to_dict()
        for k, v in zip(keys, values):
            target = d
            *path, last = k.split(".")
            for part in path:
                target = target[part]
            target[last] = v
        cfg = RunConfig.from_dict(d)
        rec = train_run(cfg, int(cfg.seeds[0]), None)
        results.append({"point": dict(zip(keys, values)),
                        "val": rec["val"], "test": rec["test"]})
    best = min(results, key=lambda r: r["val"].get(select, np.inf))
    return {"results": results, "best": best}
