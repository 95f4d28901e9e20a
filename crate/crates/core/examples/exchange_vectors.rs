//! Writes a WVEC1 exchange file for the CWE catalog and serves it back as an
//! embedding provider.
//!
//!     cargo run --example exchange_vectors

use weaknessminer::cwe_catalog::Catalog;
use weaknessminer::semvec::{load_exchange_file, EmbeddingProvider, ExchangeFile, TextRef};

fn main() -> weaknessminer::Result<()> {
    let catalog = Catalog::builtin();
    let mut file = ExchangeFile::new(4);
    file.comments.push("model_revision=demo-1".into());
    for (i, c) in catalog.categories().iter().enumerate() {
        let x = i as f64;
        file.records.push((
            c.cwe_id.clone(),
            vec![x.sin(), x.cos(), 1.0 / (x + 1.0), -x / 40.0],
        ));
    }
    file.records
        .push(("0123abcd".into(), vec![0.1, 0.2, 0.3, 0.4]));

    let path = std::env::temp_dir().join("weaknessminer-demo.wvec");
    file.save(&path)?;
    print!(
        "{}",
        std::fs::read_to_string(&path)?
            .lines()
            .take(3)
            .collect::<Vec<_>>()
            .join("\n")
    );
    println!("\n...");

    let provider = load_exchange_file("demo", &path)?;
    let first = &catalog.categories()[0];
    println!(
        "{} -> {:?}",
        first.cwe_id,
        provider.embed(TextRef::Category(first))?.values
    );
    match ExchangeFile::parse("WVEC1 dim=2\nx\t1,2\nx\t3,4\n") {
        Err(e) => println!("duplicate ids rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
