//! Resolve a run configuration from defaults and a flat key-value file, then
//! record it in a manifest together with the dataset's content hash.
//!
//! cargo run --release --example run_config

use recgnn::config::RunConfig;
use recgnn::dataset::write_jsonl;
use recgnn::manifest::Manifest;
use recgnn::taskgen::generate;

fn main() -> recgnn::Result<()> {
    let file = "task = \"distance\"\nconv = \"recgin_e\"\nepochs = 100\nseeds = [0, 1]\n";
    let cfg = RunConfig::parse(file, "inline")?;
    println!("resolved: task {}, conv {}, epochs {}, embed_dim {} (default)", cfg.task, cfg.conv, cfg.epochs, cfg.embed_dim);

    let data = std::env::temp_dir().join("recgnn-example-distance.jsonl");
    write_jsonl(&data, &generate(&cfg.generator())?)?;
    let mut manifest = Manifest::new("example", &cfg);
    manifest.add_input("dataset", &data)?;
    println!("{}", manifest.render()?);
    Ok(())
}
