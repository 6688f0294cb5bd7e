//! Quantile band of the remaining low-level life across the applied
//! high-level cycles, written as CSV and SVG.
//!
//! ```text
//! cargo run --release --example remaining_life_band -- [out-dir]
//! ```

use std::path::PathBuf;

use dldr::data::{DatasetId, KneeProtocol};
use dldr::plot::{Plot, Series, Style};
use dldr::propagate::n2_band;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let protocol = KneeProtocol::load(root.join("fixtures/knee_protocol.json"))?;
    let model = protocol.model(DatasetId::Xie045)?;
    let grid: Vec<f64> = (0..=16).map(|i| 10_000.0 * i as f64).collect();
    let levels = [0.05, 0.5, 0.95];
    let band = n2_band(&model, &grid, &levels, 20_000, 3)?;

    let mut plot = Plot::new("Remaining-life band (xie045)", "n1", "n2");
    for (l, level) in levels.iter().enumerate() {
        let pts = band.n1.iter().zip(&band.quantiles).map(|(n1, q)| (*n1, q[l])).collect();
        let style = if l == 1 { Style::Line } else { Style::Dashed };
        plot.series.push(Series::new(format!("q{level}"), pts, style));
    }
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("band.csv"), band.to_csv())?;
    std::fs::write(out.join("band.svg"), plot.to_svg())?;
    print!("{}", band.to_csv());
    println!("wrote band.csv and band.svg to {}", out.display());
    Ok(())
}
