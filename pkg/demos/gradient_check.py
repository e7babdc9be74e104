"""Compare tape gradients with central differences on a tiny model."""
from aste_grid.train import TrainConfig, gradcheck_model, grad_check_report, toy_sentence

s = toy_sentence()
print("sentence:", " ".join(s.tokens))

for aggregator in ("lstm", "mean"):
    config = TrainConfig(aggregator=aggregator, layers=3, toy_embed_dim=16, hidden=8,
                         d_node=16, h_g=8)
    model = gradcheck_model(config, list(s.tokens))
    report = grad_check_report(model, s, eps=1e-4, sample_size=200)
    print(f"{aggregator}: {model.num_parameters()} parameters, "
          f"{report['checked']} coordinates checked, {report['skipped']} skipped at kinks, "
          f"max relative error {report['max_error']:.2e}")
    worst = sorted(report["per_group"].items(), key=lambda kv: -kv[1])[:3]
    for name, err in worst:
        print(f"    {name:<24} {err:.2e}")
