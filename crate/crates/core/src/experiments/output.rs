use crate::error::Result;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

/// Shortest round-trip decimal form, so identical values give identical bytes.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub struct CsvFile {
    name: String,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvFile {
    pub fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self> {
        let file = File::create(dir.join(name))?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(header)?;
        Ok(CsvFile { name: name.into(), writer })
    }

    pub fn row(&mut self, fields: &[&str]) -> Result<()> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    /// Flushes and returns the file name.
    pub fn finish(mut self) -> Result<String> {
        self.writer.flush()?;
        Ok(self.name)
    }
}
