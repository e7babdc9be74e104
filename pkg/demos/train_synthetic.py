"""Train a small model on the synthetic corpus and look at its predictions."""
import sys
import time

from aste_grid import DatasetSplit, TrainConfig, evaluate, generate_synthetic, predict, train_loop

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 60

train = generate_synthetic(0, 40)
val = generate_synthetic(1, 10)
test = generate_synthetic(2, 10)

# smaller than the defaults so the demo finishes in about a minute
config = TrainConfig(hidden=24, d_node=32, h_g=24, toy_embed_dim=24, max_epochs=epochs,
                     patience=epochs, batch_size=8, lr=0.005)


def show(rec):
    if rec["epoch"] % 10 == 0:
        print(f"epoch {rec['epoch']:>3}  train loss {rec['train_loss']:7.3f}  "
              f"val loss {rec['val_loss']:7.3f}  val F1 {rec['val_f1']:.3f}")


start = time.perf_counter()
model, history = train_loop(config, DatasetSplit(train, val, test), on_epoch=show)
print(f"{len(history)} epochs in {time.perf_counter() - start:.0f}s")

m = evaluate(model, test)
print(f"test P {m.precision:.3f}  R {m.recall:.3f}  F1 {m.f1:.3f}")

for s in test[:4]:
    pred = [(" ".join(s.tokens[k] for k in t.aspect), " ".join(s.tokens[k] for k in t.opinion),
             t.sentiment) for t in predict(model, s)]
    print(" ".join(s.tokens))
    print("   ->", pred)
