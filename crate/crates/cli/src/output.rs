//! Batch data writers. CSV rows are `rep,t,re_z,im_z`; the binary layout is
//! a 16-byte header (sequence count, length; both little-endian u64)
//! followed by little-endian f64 pairs, re then im, sequence by sequence.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use noncirc::sampler::Batch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Binary,
}

impl Format {
    pub fn label(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Binary => "binary",
        }
    }
}

pub fn write_batch(batch: &Batch<f64>, n: usize, format: Format, path: &Path) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => write_csv(batch, &mut out),
        Format::Binary => write_binary(batch, n, &mut out),
    }?;
    out.flush()
}

fn write_csv<W: Write>(batch: &Batch<f64>, out: &mut W) -> io::Result<()> {
    writeln!(out, "rep,t,re_z,im_z")?;
    for (rep, sequence) in batch.sequences.iter().enumerate() {
        for (t, value) in sequence.iter().enumerate() {
            writeln!(out, "{rep},{t},{},{}", value.re, value.im)?;
        }
    }
    Ok(())
}

fn write_binary<W: Write>(batch: &Batch<f64>, n: usize, out: &mut W) -> io::Result<()> {
    out.write_all(&(batch.sequences.len() as u64).to_le_bytes())?;
    out.write_all(&(n as u64).to_le_bytes())?;
    for sequence in &batch.sequences {
        for value in sequence {
            out.write_all(&value.re.to_le_bytes())?;
            out.write_all(&value.im.to_le_bytes())?;
        }
    }
    Ok(())
}
