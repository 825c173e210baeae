use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{validate_labels, AudioRecord, AudioSource, Gender};
use crate::error::{Error, Result};

/// Speaker metadata file name in the published dataset layout.
pub const METADATA_FILE: &str = "audioMNIST_meta.txt";

const FULL_SPEAKERS: usize = 60;
const TAKES_PER_DIGIT: usize = 50;

#[derive(Deserialize)]
struct SpeakerMeta {
    gender: String,
}

/// Parses `<digit>_<speaker>_<take>.wav` into `(digit, speaker, take)`.
pub fn parse_file_name(path: &Path) -> Result<(u8, u32, u32)> {
    let bad = |reason: &str| Error::FileName {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let stem = path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_suffix(".wav"))
        .ok_or_else(|| bad("not a .wav file name"))?;
    let parts: Vec<&str> = stem.split('_').collect();
    let [digit, speaker, take] = parts[..] else {
        return Err(bad("expected <digit>_<speaker>_<take>.wav"));
    };
    let digit: u8 = digit.parse().map_err(|_| bad("digit is not a number"))?;
    if digit > 9 {
        return Err(bad("digit outside 0..=9"));
    }
    let speaker = speaker.parse().map_err(|_| bad("speaker is not a number"))?;
    let take = take.parse().map_err(|_| bad("take is not a number"))?;
    Ok((digit, speaker, take))
}

fn read_metadata(path: &Path) -> Result<HashMap<u32, Gender>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: BTreeMap<String, SpeakerMeta> = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    raw.into_iter()
        .map(|(id, meta)| {
            let speaker = id
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("metadata speaker id {id:?} is not a number")))?;
            let gender = match meta.gender.trim().to_ascii_lowercase().as_str() {
                "female" => Gender::Female,
                "male" => Gender::Male,
                other => {
                    return Err(Error::Data(format!("speaker {id}: unknown gender {other:?}")))
                }
            };
            Ok((speaker, gender))
        })
        .collect()
}

/// Indexes an AudioMNIST tree: `root/<speaker>/<digit>_<speaker>_<take>.wav`
/// plus the speaker metadata file (defaulting to `root/audioMNIST_meta.txt`).
/// Records are sorted by speaker, digit and take. When all 60 speakers are
/// present the full 30000-file layout is verified.
pub fn scan_audiomnist(root: &Path, metadata: Option<&Path>) -> Result<Vec<AudioRecord>> {
    let meta_path = metadata.map(Path::to_path_buf).unwrap_or_else(|| root.join(METADATA_FILE));
    let genders = read_metadata(&meta_path)?;

    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let mut records = Vec::new();
    for dir in dirs {
        let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("wav") {
                continue;
            }
            let (digit, speaker, take) = parse_file_name(&path)?;
            let gender = *genders.get(&speaker).ok_or_else(|| {
                Error::Data(format!("no metadata for speaker {speaker} ({})", path.display()))
            })?;
            let record = AudioRecord {
                source: AudioSource::File(path),
                digit,
                speaker,
                gender,
                take,
                fold: None,
            };
            validate_labels(&record)?;
            records.push(record);
        }
    }
    if records.is_empty() {
        return Err(Error::Data(format!("no recordings under {}", root.display())));
    }
    records.sort_by_key(|r| (r.speaker, r.digit, r.take));

    let speakers: std::collections::BTreeSet<u32> = records.iter().map(|r| r.speaker).collect();
    if speakers.len() == FULL_SPEAKERS {
        check_complete(&records)?;
    }
    Ok(records)
}

/// Verifies the complete dataset: 60 speakers with 50 takes of every digit.
pub fn check_complete(records: &[AudioRecord]) -> Result<()> {
    let mut counts: BTreeMap<(u32, u8), usize> = BTreeMap::new();
    for r in records {
        *counts.entry((r.speaker, r.digit)).or_default() += 1;
    }
    let speakers: std::collections::BTreeSet<u32> = records.iter().map(|r| r.speaker).collect();
    if speakers.len() != FULL_SPEAKERS {
        return Err(Error::Data(format!(
            "expected {FULL_SPEAKERS} speakers, found {}",
            speakers.len()
        )));
    }
    for &s in &speakers {
        for d in 0..10u8 {
            let n = counts.get(&(s, d)).copied().unwrap_or(0);
            if n != TAKES_PER_DIGIT {
                return Err(Error::Data(format!(
                    "speaker {s} digit {d}: {n} recordings, expected {TAKES_PER_DIGIT}"
                )));
            }
        }
    }
    Ok(())
}
