//! Forum thread data: loading, validation, and split hygiene.
//!
//! A [`Thread`] is one forum question plus its ordered comments; the comments
//! are the candidate answers. Threads arrive as JSONL, one object per line:
//!
//! ```text
//! {"id": str, "subject": str, "body": str,
//!  "comments": [{"id": str, "text": str, "label": "Good"|"PotentiallyUseful"|"Bad"|null}]}
//! ```
//!
//! A `null` label means [`Label::Unlabeled`], which is only permitted in
//! training-source data (`train`/`raw` splits). Evaluation splits must be
//! fully labeled so that MAP stays meaningful.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gold relevance judgment for a comment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Good,
    PotentiallyUseful,
    Bad,
    /// No annotation. Allowed only in training-source data.
    Unlabeled,
}

impl Label {
    /// Parses a schema label string, case-insensitively. `None` maps to
    /// [`Label::Unlabeled`]; an unknown string is a hard error.
    pub fn parse(raw: Option<&str>) -> Result<Label> {
        match raw {
            None => Ok(Label::Unlabeled),
            Some(s) => match s.to_lowercase().as_str() {
                "good" => Ok(Label::Good),
                "potentiallyuseful" => Ok(Label::PotentiallyUseful),
                "bad" => Ok(Label::Bad),
                _ => Err(Error::invalid(format!("unknown label {s:?}"))),
            },
        }
    }

    fn as_schema_str(&self) -> Option<&'static str> {
        match self {
            Label::Good => Some("Good"),
            Label::PotentiallyUseful => Some("PotentiallyUseful"),
            Label::Bad => Some("Bad"),
            Label::Unlabeled => None,
        }
    }
}

/// One comment (candidate answer) in a thread.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    pub id: String,
    pub text: String,
    pub label: Label,
}

/// One forum question with its ordered comments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thread {
    pub id: String,
    pub subject: String,
    pub body: String,
    pub comments: Vec<Comment>,
}

impl Thread {
    /// The question text used everywhere downstream: subject and body joined
    /// by a single space, with an empty subject omitted.
    pub fn question_text(&self) -> String {
        if self.subject.trim().is_empty() {
            self.body.clone()
        } else {
            format!("{} {}", self.subject, self.body)
        }
    }

    /// True if at least one comment is labeled Good.
    pub fn has_good_comment(&self) -> bool {
        self.comments.iter().any(|c| c.label == Label::Good)
    }
}

/// Which part of the corpus a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Dev,
    Test,
    Raw,
}

impl SplitTag {
    /// Training-source splits may contain unlabeled comments.
    pub fn is_training_source(&self) -> bool {
        matches!(self, SplitTag::Train | SplitTag::Raw)
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SplitTag::Train => "train",
            SplitTag::Dev => "dev",
            SplitTag::Test => "test",
            SplitTag::Raw => "raw",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<SplitTag> {
        match s.to_lowercase().as_str() {
            "train" => Ok(SplitTag::Train),
            "dev" => Ok(SplitTag::Dev),
            "test" => Ok(SplitTag::Test),
            "raw" => Ok(SplitTag::Raw),
            _ => Err(Error::invalid(format!("unknown split tag {s:?}"))),
        }
    }
}

/// An ordered collection of threads with a split tag.
///
/// Immutable after construction; share it freely between threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub threads: Vec<Thread>,
    pub split_tag: SplitTag,
}

#[derive(Serialize, Deserialize)]
struct CommentRecord {
    id: String,
    text: String,
    label: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ThreadRecord {
    id: String,
    subject: String,
    body: String,
    comments: Vec<CommentRecord>,
}

impl Dataset {
    /// Builds a dataset from already-parsed threads, checking the same
    /// invariants as [`load_dataset`].
    pub fn new(threads: Vec<Thread>, split_tag: SplitTag) -> Result<Dataset> {
        let mut seen = HashSet::new();
        for thread in &threads {
            if !seen.insert(thread.id.clone()) {
                return Err(Error::invalid(format!(
                    "duplicate thread id {:?}",
                    thread.id
                )));
            }
            validate_thread(thread, split_tag).map_err(Error::invalid)?;
        }
        Ok(Dataset { threads, split_tag })
    }

    /// Serializes back to the JSONL schema, one thread per line, LF endings.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for thread in &self.threads {
            let record = ThreadRecord {
                id: thread.id.clone(),
                subject: thread.subject.clone(),
                body: thread.body.clone(),
                comments: thread
                    .comments
                    .iter()
                    .map(|c| CommentRecord {
                        id: c.id.clone(),
                        text: c.text.clone(),
                        label: c.label.as_schema_str().map(str::to_owned),
                    })
                    .collect(),
            };
            out.push_str(&serde_json::to_string(&record).expect("thread serializes"));
            out.push('\n');
        }
        out
    }

    /// Writes the JSONL form to `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn len(&self) -> usize {
        self.threads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.threads.is_empty()
    }
}

fn validate_thread(thread: &Thread, split_tag: SplitTag) -> std::result::Result<(), String> {
    if thread.id.is_empty() {
        return Err("empty thread id".to_string());
    }
    if thread.body.trim().is_empty() {
        return Err(format!("thread {:?} has empty body", thread.id));
    }
    let mut comment_ids = HashSet::new();
    for comment in &thread.comments {
        if comment.id.is_empty() {
            return Err(format!("thread {:?} has a comment with empty id", thread.id));
        }
        if !comment_ids.insert(comment.id.as_str()) {
            return Err(format!(
                "thread {:?} has duplicate comment id {:?}",
                thread.id, comment.id
            ));
        }
        if comment.text.trim().is_empty() {
            return Err(format!(
                "comment {:?} in thread {:?} has empty text",
                comment.id, thread.id
            ));
        }
        if comment.label == Label::Unlabeled && !split_tag.is_training_source() {
            return Err(format!(
                "comment {:?} in thread {:?} is unlabeled, not allowed in a {split_tag} split",
                comment.id, thread.id
            ));
        }
    }
    Ok(())
}

/// Loads a JSONL thread file, preserving input order.
///
/// Fails with a 1-based line number on malformed JSON, a duplicate thread id,
/// empty comment text, an unknown label, or an unlabeled comment in a
/// dev/test split.
pub fn load_dataset(path: impl AsRef<Path>, split_tag: SplitTag) -> Result<Dataset> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let content = fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    load_dataset_from_str(&content, split_tag, &display)
}

/// Same as [`load_dataset`] but from an in-memory string; `source` is the
/// name used in error messages.
pub fn load_dataset_from_str(
    content: &str,
    split_tag: SplitTag,
    source: &str,
) -> Result<Dataset> {
    let mut threads = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: ThreadRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(source, line_no, format!("malformed JSON: {e}")))?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::parse(
                source,
                line_no,
                format!("duplicate thread id {:?}", record.id),
            ));
        }
        let mut comments = Vec::with_capacity(record.comments.len());
        for c in record.comments {
            let label = Label::parse(c.label.as_deref())
                .map_err(|e| Error::parse(source, line_no, e.to_string()))?;
            comments.push(Comment {
                id: c.id,
                text: c.text,
                label,
            });
        }
        let thread = Thread {
            id: record.id,
            subject: record.subject,
            body: record.body,
            comments,
        };
        validate_thread(&thread, split_tag).map_err(|m| Error::parse(source, line_no, m))?;
        threads.push(thread);
    }
    Ok(Dataset { threads, split_tag })
}

/// Removes from `train` every thread whose id appears in any held-out
/// dataset. Order is preserved; this is the train/dev/test hygiene step.
pub fn exclude_overlap(train: &Dataset, held_out: &[&Dataset]) -> Dataset {
    let held_ids: HashSet<&str> = held_out
        .iter()
        .flat_map(|d| d.threads.iter().map(|t| t.id.as_str()))
        .collect();
    Dataset {
        threads: train
            .threads
            .iter()
            .filter(|t| !held_ids.contains(t.id.as_str()))
            .cloned()
            .collect(),
        split_tag: train.split_tag,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn thread_line(id: &str) -> String {
        format!(
            r#"{{"id": "{id}", "subject": "s", "body": "b", "comments": [{{"id": "c1", "text": "hello", "label": "Good"}}]}}"#
        )
    }

    #[test]
    fn loads_labeled_thread() {
        let line = r#"{"id": "q1", "subject": "Taxi", "body": "How good are Karwa services?", "comments": [
            {"id": "c1", "text": "Very good.", "label": "good"},
            {"id": "c2", "text": "No idea.", "label": "Bad"},
            {"id": "c3", "text": "Meh.", "label": "BAD"}]}"#
            .replace('\n', " ");
        let ds = load_dataset_from_str(&line, SplitTag::Dev, "mem").unwrap();
        assert_eq!(ds.threads.len(), 1);
        let labels: Vec<Label> = ds.threads[0].comments.iter().map(|c| c.label).collect();
        assert_eq!(labels, vec![Label::Good, Label::Bad, Label::Bad]);
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let ds = load_dataset_from_str("", SplitTag::Train, "mem").unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn duplicate_thread_id_names_line() {
        let content = format!(
            "{}\n{}\n{}\n{}\n",
            thread_line("q1"),
            thread_line("q2"),
            thread_line("q3"),
            thread_line("q1")
        );
        let err = load_dataset_from_str(&content, SplitTag::Train, "mem").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mem:4"), "error should name line 4: {msg}");
        assert!(msg.contains("q1"));
    }

    #[test]
    fn malformed_json_names_line() {
        let content = format!("{}\nnot json\n", thread_line("q1"));
        let err = load_dataset_from_str(&content, SplitTag::Train, "mem").unwrap_err();
        assert!(err.to_string().contains("mem:2"));
    }

    #[test]
    fn empty_comment_text_rejected() {
        let line = r#"{"id": "q1", "subject": "", "body": "b", "comments": [{"id": "c1", "text": "   ", "label": null}]}"#;
        let err = load_dataset_from_str(line, SplitTag::Train, "mem").unwrap_err();
        assert!(err.to_string().contains("empty text"));
    }

    #[test]
    fn unknown_label_is_hard_error() {
        let line = r#"{"id": "q1", "subject": "", "body": "b", "comments": [{"id": "c1", "text": "t", "label": "Great"}]}"#;
        let err = load_dataset_from_str(line, SplitTag::Train, "mem").unwrap_err();
        assert!(err.to_string().contains("unknown label"));
    }

    #[test]
    fn unlabeled_ok_in_train_rejected_in_dev() {
        let line = r#"{"id": "q1", "subject": "", "body": "b", "comments": [{"id": "c1", "text": "t", "label": null}]}"#;
        assert!(load_dataset_from_str(line, SplitTag::Raw, "mem").is_ok());
        assert!(load_dataset_from_str(line, SplitTag::Dev, "mem").is_err());
    }

    #[test]
    fn duplicate_comment_id_rejected() {
        let line = r#"{"id": "q1", "subject": "", "body": "b", "comments": [
            {"id": "c1", "text": "a", "label": null},
            {"id": "c1", "text": "b", "label": null}]}"#
            .replace('\n', " ");
        let err = load_dataset_from_str(&line, SplitTag::Train, "mem").unwrap_err();
        assert!(err.to_string().contains("duplicate comment id"));
    }

    #[test]
    fn question_text_joins_subject_and_body() {
        let t = Thread {
            id: "q".into(),
            subject: "Taxi".into(),
            body: "Any good?".into(),
            comments: vec![],
        };
        assert_eq!(t.question_text(), "Taxi Any good?");
        let t2 = Thread { subject: "".into(), ..t };
        assert_eq!(t2.question_text(), "Any good?");
    }

    #[test]
    fn exclude_overlap_is_id_set_difference() {
        let mk = |ids: &[&str]| Dataset {
            threads: ids
                .iter()
                .map(|id| Thread {
                    id: id.to_string(),
                    subject: String::new(),
                    body: "b".into(),
                    comments: vec![],
                })
                .collect(),
            split_tag: SplitTag::Train,
        };
        let train = mk(&["a", "b", "c"]);
        let held = mk(&["b"]);
        let got = exclude_overlap(&train, &[&held]);
        let ids: Vec<&str> = got.threads.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "c"]);

        let unchanged = exclude_overlap(&train, &[]);
        assert_eq!(unchanged.threads.len(), 3);

        let all = exclude_overlap(&mk(&["a"]), &[&mk(&["a"])]);
        assert!(all.is_empty());
    }

    #[test]
    fn jsonl_roundtrip() {
        let content = format!("{}\n{}\n", thread_line("q1"), thread_line("q2"));
        let ds = load_dataset_from_str(&content, SplitTag::Train, "mem").unwrap();
        let again = load_dataset_from_str(&ds.to_jsonl(), SplitTag::Train, "mem").unwrap();
        assert_eq!(ds, again);
    }
}
