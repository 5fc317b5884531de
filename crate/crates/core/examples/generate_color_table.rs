//! Regenerates the bundled color-name lookup table.
//!
//! ```text
//! cargo run --example generate_color_table -- crates/core/data/color_names.bin
//! ```

use longtrack::features::ColorNameTable;

fn main() -> longtrack::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "color_names.bin".to_string());
    ColorNameTable::prototype().save(&out)?;
    println!("wrote {out}");
    Ok(())
}
