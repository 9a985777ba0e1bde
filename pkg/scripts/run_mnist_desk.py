"""Desk-scale MNIST experiment: 2000 train / 1000 test, trained vs untrained.

Expects the IDX files in the data directory (scripts/get_mnist.py fetches
them). Prints the test Recall@k of the trained model next to the
untrained-initialization baseline.
"""

import argparse
from pathlib import Path

from bayestriplet import harness
from bayestriplet.harness import RECALL_KS, TrainConfig, evaluate, train
from bayestriplet.mlp import init_params, save_checkpoint


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--loss", default="but", choices=["but", "bunca"])
    parser.add_argument("--data-dir", default=None)
    parser.add_argument("--train-limit", type=int, default=2000)
    parser.add_argument("--test-limit", type=int, default=1000)
    parser.add_argument("--epochs", type=int, default=15)
    parser.add_argument("--lr", type=float, default=3e-3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/mnist-desk")
    args = parser.parse_args()

    cfg = TrainConfig(
        dataset="mnist", loss=args.loss, embed_dim=16, hidden_dims=(256,),
        n_per_class=5, margin=0.25, lr=args.lr, max_epochs=args.epochs,
        patience=args.epochs, seed=args.seed, normalize_embeddings=True,
        data_dir=args.data_dir, train_limit=args.train_limit,
        test_limit=args.test_limit, out_dir=args.out,
    )
    root = cfg.resolved_data_dir()
    missing = [n for n in harness.MNIST_FILES.values() if not (root / n).exists()]
    if missing:
        raise SystemExit(f"missing IDX files under {root}: {missing}; "
                         "run scripts/get_mnist.py first")

    result = train(cfg)
    splits = harness.load_splits(cfg)
    q = splits["train"].inputs.shape[1]
    untrained = init_params((q, *cfg.hidden_dims, cfg.embed_dim), harness._rngs(cfg)["init"])
    init_ckpt = Path(args.out) / "init.ckpt"
    save_checkpoint(untrained, init_ckpt)

    baseline = evaluate(init_ckpt, cfg, "test")
    trained = evaluate(result.out_dir / "best.ckpt", cfg, "test")
    print("untrained test " + " ".join(f"R@{k}={baseline[k]:.3f}" for k in RECALL_KS))
    print("trained   test " + " ".join(f"R@{k}={trained[k]:.3f}" for k in RECALL_KS))
    print(f"R@1 gap: {trained[1] - baseline[1]:+.3f}")


if __name__ == "__main__":
    main()
