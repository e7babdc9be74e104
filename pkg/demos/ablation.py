"""Aggregator x layer-count comparison on synthetic data."""
from aste_grid import DatasetSplit, TrainConfig, generate_synthetic
from aste_grid.train import ablation, format_ablation

split = DatasetSplit(generate_synthetic(0, 30), generate_synthetic(1, 10),
                     generate_synthetic(2, 10))
config = TrainConfig(hidden=16, d_node=16, h_g=16, toy_embed_dim=16, max_epochs=15,
                     patience=15, batch_size=8, lr=0.005)


def progress(row, model, history):
    print(f"  trained {row['aggregator']} with {row['layers']} layers "
          f"for {row['epochs']} epochs")


rows = ablation(config, split, aggregators=("lstm", "mean"), layer_counts=(2, 3),
                on_row=progress)
print()
print(format_ablation(rows))
