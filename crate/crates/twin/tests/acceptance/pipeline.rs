//! Default training pipeline: window counts, epochs, learning rate and a
//! non-increasing validation loss, at reduced latent widths.

use twin::pipeline::gnn::{build_corpus, train_on_corpus, GnnPipelineConfig};
use twin_core::stats::median;

use crate::{ensure, fail, Outcome};

pub fn run() -> Outcome {
    let cfg = GnnPipelineConfig::default();
    ensure!(cfg.train.epochs == 50, "default epochs {}", cfg.train.epochs);
    ensure!(cfg.train.lr == 0.01, "default learning rate {}", cfg.train.lr);
    ensure!(cfg.model.tau == 500, "default window length {}", cfg.model.tau);

    let corpus = build_corpus(&cfg.corpus).map_err(fail("corpus"))?;
    let mut ratios = Vec::new();
    let mut lines = Vec::new();
    for seed in 0..3 {
        let run = GnnPipelineConfig { seed, ..cfg.clone() };
        let trained = train_on_corpus(&run, &corpus).map_err(fail("training"))?;
        let w = &trained.windows;
        ensure!(
            (w.train, w.val, w.test, w.tau) == (3200, 800, 1000, 500),
            "seed {seed}: windows {}/{}/{} of length {}",
            w.train,
            w.val,
            w.test,
            w.tau
        );
        let val = &trained.curves.val;
        ensure!(val.len() == 50 && trained.curves.train.len() == 50, "seed {seed}: {} epochs recorded", val.len());
        ratios.push(val[49] / val[0]);
        lines.push(format!("seed {seed}: val {:.4} -> {:.4}", val[0], val[49]));
    }
    let m = median(&ratios);
    ensure!(m <= 1.0, "median val(50)/val(1) = {m:.3} ({})", lines.join("; "));
    Ok(format!("5000 windows (3200/800/1000, tau 500), 50 epochs at lr 0.01; median val(50)/val(1) = {m:.3} ({})", lines.join("; ")))
}
