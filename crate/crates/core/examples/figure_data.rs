//! Write the plot-ready figure tables into a directory.
//!
//! cargo run --example figure_data [dir]

use std::fs::File;
use std::io::BufWriter;

use minimax_design::figures::all_figures;

fn main() -> minimax_design::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "figures".into());
    std::fs::create_dir_all(&dir)?;
    for t in all_figures(401)? {
        let path = format!("{dir}/{}.csv", t.name);
        t.write_csv(BufWriter::new(File::create(&path)?))?;
        println!("{path}: {}", t.columns.join(", "));
    }
    Ok(())
}
