//! Segment-map text file: first line `N K`, second line the N
//! space-separated labels. Used to replay a fixed segmentation.

use crate::datamodel::SegmentMap;
use crate::error::{Error, Result};
use std::fs;
use std::path::Path;

pub fn write_segment_map(path: &Path, seg: &SegmentMap) -> Result<()> {
    let mut out = format!("{} {}\n", seg.pixels(), seg.segment_count());
    let mut first = true;
    for &label in seg.labels() {
        if !first {
            out.push(' ');
        }
        out.push_str(&label.to_string());
        first = false;
    }
    out.push('\n');
    fs::write(path, out)?;
    Ok(())
}

pub fn read_segment_map(path: &Path) -> Result<SegmentMap> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text.split_whitespace();
    let pixels: usize = next_count(&mut tokens)?;
    let segments: usize = next_count(&mut tokens)?;
    let mut labels = Vec::with_capacity(pixels);
    for _ in 0..pixels {
        labels.push(next_count(&mut tokens)?);
    }
    if tokens.next().is_some() {
        return Err(Error::HeaderMismatch(format!(
            "trailing tokens after {pixels} labels"
        )));
    }
    let seg = SegmentMap::from_labels(&labels)?;
    if seg.segment_count() != segments {
        return Err(Error::HeaderMismatch(format!(
            "file declares {segments} segments, labels span {}",
            seg.segment_count()
        )));
    }
    if seg.labels() != labels {
        return Err(Error::HeaderMismatch(
            "labels are not densely numbered".into(),
        ));
    }
    Ok(seg)
}

fn next_count<'a>(tokens: &mut impl Iterator<Item = &'a str>) -> Result<usize> {
    let token = tokens
        .next()
        .ok_or_else(|| Error::HeaderMismatch("segment map file ended early".into()))?;
    token.parse::<usize>().map_err(|_| Error::NonNumeric {
        row: 0,
        value: token.to_string(),
    })
}
