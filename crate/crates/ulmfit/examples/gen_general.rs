//! Rewrites `data/general.txt` from the synthetic generator.

fn main() -> std::io::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/general.txt");
    std::fs::write(path, ulmfit::general::generate())?;
    eprintln!("wrote {path}");
    Ok(())
}
