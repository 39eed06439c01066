//! Loading a labelled CSV: header detection, label column, duplicate
//! removal, and the size check against the known benchmark tables.
//!
//! cargo run --example loading_data [-- path/to/data.csv]

use lsh_itables::data::{check_benchmark_size, load_csv, parse_csv, LabelColumn, LoadOptions};

fn main() -> lsh_itables::Result<()> {
    let text = "a,b,is_outlier\n1,2,0\n1,2,0\n3,4,1\n";
    let inline = parse_csv("inline", text, LoadOptions::default())?;
    println!(
        "inline: {} rows after dedup, {} outliers",
        inline.len(),
        inline.outliers()
    );

    let first_col = parse_csv(
        "label-first",
        "1,0.5,0.25\n0,0.1,0.2\n",
        LoadOptions {
            label_column: LabelColumn::Index(0),
            dedup: true,
        },
    )?;
    println!("label-first: d = {}, labels {:?}", first_col.dim(), first_col.labels);

    match parse_csv("broken", "1,2,0\n1,x,0\n", LoadOptions::default()) {
        Err(e) => println!("broken: {e}"),
        Ok(_) => unreachable!(),
    }

    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/breastw.csv").to_string());
    for dedup in [false, true] {
        let options = LoadOptions {
            dedup,
            ..LoadOptions::default()
        };
        let dataset = load_csv(&path, options)?;
        println!(
            "{} (dedup {dedup}): n={}, d={}, outliers={}; {}",
            dataset.name,
            dataset.len(),
            dataset.dim(),
            dataset.outliers(),
            check_benchmark_size(&dataset).unwrap_or_else(|| "matches the benchmark table".into())
        );
    }
    Ok(())
}
