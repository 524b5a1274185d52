//! Reads SMILES lines from stdin and echoes those that parse, fit a 40×40
//! grid at 0.5 units/pixel and rasterize without collisions. Rejections and
//! the minimum inter-atom distance go to stderr.

use std::io::{self, BufRead, Write};

use weakchem_chem::imaging::{layout_2d, rasterize, Grid, Scheme};
use weakchem_chem::prepare;

fn main() {
    let limit: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(usize::MAX);
    let grid = Grid {
        size: 40,
        resolution: 0.5,
    };
    let (mut kept, mut rejected) = (0usize, 0usize);
    let mut min_dist = f64::INFINITY;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for line in io::stdin().lock().lines() {
        let line = line.expect("stdin is readable");
        let smi = line.trim();
        if smi.is_empty() || kept >= limit {
            continue;
        }
        let verdict = prepare(smi).and_then(|m| {
            let layout = layout_2d(&m, &grid)?;
            rasterize(&m, &layout, Scheme::EngD, &grid)?;
            Ok(layout.min_pair_distance())
        });
        match verdict {
            Ok(d) => {
                min_dist = min_dist.min(d);
                kept += 1;
                writeln!(out, "{smi}").expect("stdout is writable");
            }
            Err(e) => {
                rejected += 1;
                eprintln!("reject {smi}: {} ({e})", e.kind());
            }
        }
    }
    eprintln!("kept {kept}, rejected {rejected}, min inter-atom distance {min_dist:.3}");
}
