//! Reads SMILES on stdin and writes `id,smiles,label` rows labelled by the
//! hydroxyl rule. Molecules that do not fit a 40-pixel EngD image are skipped.

use std::io::{self, BufRead};

use weakchem_chem::imaging::{layout_2d, rasterize, Grid, Scheme};
use weakchem_chem::prepare;
use weakchem_harness::toy::hydroxyl_label;

fn main() {
    let grid = Grid {
        size: 40,
        resolution: 0.5,
    };
    let mut out = csv::Writer::from_writer(io::stdout());
    out.write_record(["id", "smiles", "label"]).unwrap();
    let mut n = 0;
    let mut skipped = 0;
    for line in io::stdin().lock().lines() {
        let line = line.unwrap();
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let fits = prepare(s).ok().and_then(|m| {
            let layout = layout_2d(&m, &grid).ok()?;
            rasterize(&m, &layout, Scheme::EngD, &grid).ok()?;
            Some(m)
        });
        match fits {
            Some(m) => {
                n += 1;
                let label = format!("{}", hydroxyl_label(&m) as u8);
                out.write_record([format!("toy{n:04}").as_str(), s, label.as_str()])
                    .unwrap();
            }
            None => skipped += 1,
        }
    }
    eprintln!("wrote {n}, skipped {skipped}");
}
