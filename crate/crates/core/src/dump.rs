//! Streaming reader for StackExchange `Posts.xml` dumps and assembly of the
//! raw question/answer pools.
//!
//! Rows are self-closing `<row .../>` elements. The reader decodes the XML
//! attribute layer only; the HTML inside `Body` keeps its own entities until
//! [`crate::corpus::clean_html`] runs.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;
use std::path::PathBuf;

use chrono::{DateTime, NaiveDateTime, Utc};
use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PostType {
    Question,
    Answer,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPost {
    pub post_id: u64,
    pub post_type: PostType,
    pub parent_id: Option<u64>,
    pub accepted_answer_id: Option<u64>,
    pub score: i64,
    pub title: Option<String>,
    pub body: String,
    pub tags: Vec<String>,
    pub creation_date: Option<DateTime<Utc>>,
}

/// Iterator over the rows of a dump. Malformed rows are skipped and counted;
/// a broken stream ends iteration with a single error item.
pub struct PostReader<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    skipped: usize,
    finished: bool,
}

impl<R: BufRead> PostReader<R> {
    pub fn new(input: R) -> Self {
        Self {
            reader: Reader::from_reader(input),
            buf: Vec::new(),
            skipped: 0,
            finished: false,
        }
    }

    /// Rows dropped so far because they lacked `Id`/`PostTypeId` or carried
    /// unparsable values.
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

impl<R: BufRead> Iterator for PostReader<R> {
    type Item = Result<RawPost>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        loop {
            self.buf.clear();
            match self.reader.read_event_into(&mut self.buf) {
                Ok(Event::Empty(e)) | Ok(Event::Start(e)) if e.name().as_ref() == "row" => match parse_row(&e) {
                    Some(post) => return Some(Ok(post)),
                    None => self.skipped += 1,
                },
                Ok(Event::Eof) => {
                    self.finished = true;
                    return None;
                }
                Ok(_) => {}
                Err(e) => {
                    self.finished = true;
                    return Some(Err(Error::Ingest(format!(
                        "at byte {}: {e}",
                        self.reader.buffer_position()
                    ))));
                }
            }
        }
    }
}

/// Result of reading a whole dump.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedDump {
    pub posts: Vec<RawPost>,
    pub skipped_rows: usize,
}

pub fn parse_dump<R: BufRead>(input: R) -> Result<ParsedDump> {
    let mut reader = PostReader::new(input);
    let mut posts = Vec::new();
    for post in reader.by_ref() {
        posts.push(post?);
    }
    Ok(ParsedDump {
        posts,
        skipped_rows: reader.skipped(),
    })
}

/// Parses several dump shards in parallel; posts keep shard order.
pub fn parse_dump_files(paths: &[PathBuf]) -> Result<ParsedDump> {
    let shards: Vec<Result<ParsedDump>> = paths
        .par_iter()
        .map(|p| {
            let file = std::fs::File::open(p).map_err(|e| Error::Ingest(format!("{}: {e}", p.display())))?;
            parse_dump(std::io::BufReader::new(file))
        })
        .collect();
    let mut merged = ParsedDump::default();
    for shard in shards {
        let shard = shard?;
        merged.posts.extend(shard.posts);
        merged.skipped_rows += shard.skipped_rows;
    }
    Ok(merged)
}

fn parse_row(e: &BytesStart<'_>) -> Option<RawPost> {
    let mut attrs: HashMap<String, String> = HashMap::new();
    for attr in e.attributes() {
        let attr = attr.ok()?;
        let value = attr.normalized_value(XmlVersion::Implicit1_0).ok()?;
        attrs.insert(attr.key.as_ref().to_string(), value.into_owned());
    }
    let get = |k: &str| attrs.get(k).map(String::as_str);
    let parse_id = |k: &str| -> Option<Option<u64>> {
        match get(k) {
            None => Some(None),
            Some(v) => v.trim().parse::<u64>().ok().filter(|&id| id > 0).map(Some),
        }
    };

    let post_id = parse_id("Id")??;
    let post_type = match get("PostTypeId")?.trim() {
        "1" => PostType::Question,
        "2" => PostType::Answer,
        other => {
            other.parse::<i64>().ok()?;
            PostType::Other
        }
    };
    let parent_id = parse_id("ParentId")?;
    let accepted_answer_id = parse_id("AcceptedAnswerId")?;
    let score = match get("Score") {
        None => 0,
        Some(v) => v.trim().parse::<i64>().ok()?,
    };
    let creation_date = get("CreationDate").and_then(parse_timestamp);
    let body = get("Body").unwrap_or_default().to_string();

    let post = match post_type {
        PostType::Question => RawPost {
            post_id,
            post_type,
            parent_id: None,
            accepted_answer_id,
            score,
            title: Some(get("Title").unwrap_or_default().to_string()),
            body,
            tags: get("Tags").map(parse_tags).unwrap_or_default(),
            creation_date,
        },
        PostType::Answer => RawPost {
            post_id,
            post_type,
            parent_id: Some(parent_id?),
            accepted_answer_id: None,
            score,
            title: None,
            body,
            tags: Vec::new(),
            creation_date,
        },
        PostType::Other => RawPost {
            post_id,
            post_type,
            parent_id,
            accepted_answer_id: None,
            score,
            title: get("Title").map(str::to_string),
            body,
            tags: Vec::new(),
            creation_date,
        },
    };
    Some(post)
}

/// Splits `<a><b>` (classic dumps) or `|a|b|` (newer dumps) into lowercase tags.
pub fn parse_tags(raw: &str) -> Vec<String> {
    raw.split(['<', '>', '|'])
        .map(|t| t.trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Dump timestamps carry no zone and are UTC.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        .map(|n| n.and_utc())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAnswer {
    pub answer_id: u64,
    pub body_html: String,
    pub votes: i64,
    pub accepted: bool,
}

/// One question with every answer that survived assembly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPool {
    pub question_id: u64,
    pub title: String,
    pub body_html: String,
    pub tags: Vec<String>,
    pub answers: Vec<RawAnswer>,
}

#[derive(Debug, Clone)]
pub struct AssembleOptions {
    pub tag_filter: String,
    pub cutoff: Option<DateTime<Utc>>,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            tag_filter: "python".into(),
            cutoff: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembleReport {
    /// Answers whose parent question is missing or did not pass the tag filter.
    pub orphan_answers: usize,
    /// Answers of retained questions created after the cutoff.
    pub cutoff_answers: usize,
    /// Posts whose id was already seen; the later copy is dropped.
    pub duplicate_posts: usize,
    pub retained_pools: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assembly {
    pub pools: Vec<RawPool>,
    pub report: AssembleReport,
}

/// Groups answers under their questions. Input order does not matter: pools
/// come out by ascending question id, answers by descending score then
/// ascending id.
pub fn assemble_pools<I>(posts: I, opts: &AssembleOptions) -> Result<Assembly>
where
    I: IntoIterator<Item = RawPost>,
{
    if opts.tag_filter.trim().is_empty() {
        return Err(Error::Config("tag filter must be nonempty".into()));
    }
    let tag = opts.tag_filter.trim().to_lowercase();
    let mut report = AssembleReport::default();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut questions: BTreeMap<u64, RawPost> = BTreeMap::new();
    let mut answers: HashMap<u64, Vec<RawPost>> = HashMap::new();

    for post in posts {
        if !seen.insert(post.post_id) {
            report.duplicate_posts += 1;
            continue;
        }
        match post.post_type {
            PostType::Question if post.tags.contains(&tag) => {
                questions.insert(post.post_id, post);
            }
            PostType::Answer => {
                // parent_id is guaranteed for answers by the reader
                let parent = post.parent_id.unwrap_or(0);
                answers.entry(parent).or_default().push(post);
            }
            _ => {}
        }
    }

    let mut pools = Vec::with_capacity(questions.len());
    for (qid, q) in questions {
        let mut pool_answers: Vec<RawAnswer> = Vec::new();
        for a in answers.remove(&qid).unwrap_or_default() {
            let after_cutoff = match (opts.cutoff, a.creation_date) {
                (Some(cut), Some(created)) => created > cut,
                _ => false,
            };
            if after_cutoff {
                report.cutoff_answers += 1;
                continue;
            }
            pool_answers.push(RawAnswer {
                answer_id: a.post_id,
                body_html: a.body,
                votes: a.score,
                accepted: q.accepted_answer_id == Some(a.post_id),
            });
        }
        pool_answers.sort_by(|x, y| y.votes.cmp(&x.votes).then(x.answer_id.cmp(&y.answer_id)));
        pools.push(RawPool {
            question_id: qid,
            title: q.title.unwrap_or_default(),
            body_html: q.body,
            tags: q.tags,
            answers: pool_answers,
        });
    }
    report.orphan_answers = answers.values().map(Vec::len).sum();
    report.retained_pools = pools.len();
    Ok(Assembly { pools, report })
}
