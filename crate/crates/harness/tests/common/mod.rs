#![allow(dead_code)]

use std::path::{Path, PathBuf};

/// Halfspace experiment on a 16×16 gray image: uniform normal, boundary two
/// units from a constant 3/7 origin.
pub fn halfspace_config(attack: &str, budget: usize, seeds: &[u64], tasks: usize, extra: &str) -> String {
    let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
    let mut text = format!(
        "attack = \"{attack}\"\n\
         generator = \"bilinear\"\n\
         budget = {budget}\n\
         seeds = [{}]\n\
         {extra}\n\
         [image]\nheight = 16\nwidth = 16\nchannels = 1\n\n\
         [oracle]\nkind = \"halfspace\"\nnormal = \"uniform\"\nmargin = 2.0\n",
        seeds.join(", ")
    );
    for t in 0..tasks {
        let fill = [3.0 / 7.0, 0.25, 0.6][t % 3];
        text.push_str(&format!("\n[[tasks]]\nfill = {fill}\n"));
    }
    text
}

/// Small, fast BO settings for runs whose outcome is not under test.
pub const FAST_BO: &str = "[bo]\ninit_samples = 5\ncandidates = 200\n";

pub fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}
