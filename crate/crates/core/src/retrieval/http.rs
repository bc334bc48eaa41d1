use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use super::html::html_to_text;
use super::sources::{SourceClient, SourceError};
use super::{SearchResultDoc, SourceKind};

/// Endpoint settings for an HTTP source. Credentials come from `api_key_env`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpSourceConfig {
    pub base_url: String,
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    2000
}

fn agent(timeout_ms: u64) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(timeout_ms)))
        .user_agent("warp-repair")
        .build()
        .into()
}

fn api_key(config: &HttpSourceConfig) -> Option<String> {
    config.api_key_env.as_ref().and_then(|v| std::env::var(v).ok()).filter(|k| !k.is_empty())
}

fn get_json(agent: &ureq::Agent, kind: SourceKind, url: &str, query: &[(&str, String)], bearer: Option<&str>) -> Result<Value, SourceError> {
    let mut req = agent.get(url);
    for (k, v) in query {
        req = req.query(*k, v);
    }
    if let Some(token) = bearer {
        req = req.header("Authorization", &format!("Bearer {token}"));
    }
    req.call().and_then(|mut r| r.body_mut().read_json()).map_err(|e| match e {
        ureq::Error::Timeout(_) => SourceError::SourceTimeout { kind: kind },
        other => SourceError::SourceError { kind: kind, message: other.to_string() },
    })
}

fn rfc3339(v: &Value) -> Option<i64> {
    OffsetDateTime::parse(v.as_str()?, &Rfc3339).ok().map(|t| t.unix_timestamp())
}

/// StackExchange API client: one document per answer to the top questions.
pub struct StackExchangeClient {
    config: HttpSourceConfig,
    agent: ureq::Agent,
}

impl StackExchangeClient {
    pub fn new(config: HttpSourceConfig) -> Self {
        let agent = agent(config.timeout_ms);
        StackExchangeClient { config, agent }
    }
}

/// Pairs a `search/advanced` response with an `answers` response.
pub(crate) fn stackexchange_docs(questions: &Value, answers: &Value, limit: usize) -> Vec<SearchResultDoc> {
    let titles: BTreeMap<i64, (String, f64)> = questions["items"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|q| {
            let title = html_to_text(q["title"].as_str()?);
            Some((q["question_id"].as_i64()?, (title, q["score"].as_f64().unwrap_or(0.0))))
        })
        .collect();
    let order: Vec<i64> = questions["items"].as_array().into_iter().flatten().filter_map(|q| q["question_id"].as_i64()).collect();
    let mut items: Vec<&Value> = answers["items"].as_array().into_iter().flatten().collect();
    items.sort_by_key(|a| {
        let q = a["question_id"].as_i64().unwrap_or(0);
        (
            order.iter().position(|x| *x == q).unwrap_or(usize::MAX),
            std::cmp::Reverse(a["is_accepted"].as_bool().unwrap_or(false)),
            std::cmp::Reverse(a["score"].as_i64().unwrap_or(0)),
        )
    });
    items
        .into_iter()
        .filter_map(|a| {
            let qid = a["question_id"].as_i64()?;
            let (title, qscore) = titles.get(&qid)?.clone();
            let mut signals = BTreeMap::new();
            signals.insert("score".into(), a["score"].as_f64().unwrap_or(0.0));
            signals.insert("is_accepted".into(), if a["is_accepted"].as_bool().unwrap_or(false) { 1.0 } else { 0.0 });
            signals.insert("question_score".into(), qscore);
            Some(SearchResultDoc {
                url: format!("https://stackoverflow.com/a/{}", a["answer_id"].as_i64()?),
                title,
                body: html_to_text(a["body"].as_str().unwrap_or("")),
                source: SourceKind::StackOverflow,
                published_at: a["creation_date"].as_i64(),
                source_signals: signals,
            })
        })
        .take(limit)
        .collect()
}

impl SourceClient for StackExchangeClient {
    fn kind(&self) -> SourceKind {
        SourceKind::StackOverflow
    }

    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResultDoc>, SourceError> {
        let base = self.config.base_url.trim_end_matches('/');
        let mut params = vec![
            ("order", "desc".to_string()),
            ("sort", "relevance".to_string()),
            ("q", query.to_string()),
            ("answers", "1".to_string()),
            ("site", "stackoverflow".to_string()),
            ("pagesize", limit.to_string()),
        ];
        if let Some(key) = api_key(&self.config) {
            params.push(("key", key));
        }
        let questions = get_json(&self.agent, self.kind(), &format!("{base}/search/advanced"), &params, None)?;
        let ids: Vec<String> = questions["items"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|q| q["question_id"].as_i64().map(|i| i.to_string()))
            .collect();
        if ids.is_empty() {
            return Ok(Vec::new());
        }
        let mut params = vec![
            ("order", "desc".to_string()),
            ("sort", "votes".to_string()),
            ("site", "stackoverflow".to_string()),
            ("filter", "withbody".to_string()),
        ];
        if let Some(key) = api_key(&self.config) {
            params.push(("key", key));
        }
        let answers = get_json(&self.agent, self.kind(), &format!("{base}/questions/{}/answers", ids.join(";")), &params, None)?;
        Ok(stackexchange_docs(&questions, &answers, limit))
    }
}

/// GitHub issue search client.
pub struct GitHubIssuesClient {
    config: HttpSourceConfig,
    agent: ureq::Agent,
}

impl GitHubIssuesClient {
    pub fn new(config: HttpSourceConfig) -> Self {
        let agent = agent(config.timeout_ms);
        GitHubIssuesClient { config, agent }
    }
}

pub(crate) fn github_docs(reply: &Value, limit: usize) -> Vec<SearchResultDoc> {
    reply["items"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|it| {
            let mut signals = BTreeMap::new();
            signals.insert("comments".into(), it["comments"].as_f64().unwrap_or(0.0));
            signals.insert("reactions".into(), it["reactions"]["total_count"].as_f64().unwrap_or(0.0));
            signals.insert("closed".into(), if it["state"] == "closed" { 1.0 } else { 0.0 });
            Some(SearchResultDoc {
                url: it["html_url"].as_str()?.to_string(),
                title: it["title"].as_str().unwrap_or("").to_string(),
                body: it["body"].as_str().unwrap_or("").to_string(),
                source: SourceKind::GitHubIssues,
                published_at: rfc3339(&it["created_at"]),
                source_signals: signals,
            })
        })
        .take(limit)
        .collect()
}

impl SourceClient for GitHubIssuesClient {
    fn kind(&self) -> SourceKind {
        SourceKind::GitHubIssues
    }

    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResultDoc>, SourceError> {
        let url = format!("{}/search/issues", self.config.base_url.trim_end_matches('/'));
        let params = [("q", query.to_string()), ("per_page", limit.to_string())];
        let reply = get_json(&self.agent, self.kind(), &url, &params, api_key(&self.config).as_deref())?;
        Ok(github_docs(&reply, limit))
    }
}

/// Generic JSON web search client (SearXNG-style `results` or
/// Custom-Search-style `items`).
pub struct WebSearchClient {
    config: HttpSourceConfig,
    agent: ureq::Agent,
}

impl WebSearchClient {
    pub fn new(config: HttpSourceConfig) -> Self {
        let agent = agent(config.timeout_ms);
        WebSearchClient { config, agent }
    }
}

pub(crate) fn web_docs(reply: &Value, limit: usize) -> Vec<SearchResultDoc> {
    let items = reply["results"].as_array().or_else(|| reply["items"].as_array());
    items
        .into_iter()
        .flatten()
        .filter_map(|it| {
            let url = it["url"].as_str().or_else(|| it["link"].as_str())?;
            let body = it["content"].as_str().or_else(|| it["snippet"].as_str()).unwrap_or("");
            Some(SearchResultDoc {
                url: url.to_string(),
                title: it["title"].as_str().unwrap_or("").to_string(),
                body: html_to_text(body),
                source: SourceKind::WebSearch,
                published_at: rfc3339(&it["publishedDate"]).or_else(|| rfc3339(&it["date"])),
                source_signals: BTreeMap::new(),
            })
        })
        .take(limit)
        .collect()
}

impl SourceClient for WebSearchClient {
    fn kind(&self) -> SourceKind {
        SourceKind::WebSearch
    }

    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResultDoc>, SourceError> {
        let params = [("q", query.to_string()), ("format", "json".to_string())];
        let reply = get_json(&self.agent, self.kind(), &self.config.base_url, &params, api_key(&self.config).as_deref())?;
        Ok(web_docs(&reply, limit))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn stackexchange_answers_become_docs() {
        let questions = json!({"items": [
            {"question_id": 11, "title": "Go: undefined: fmt.Printl", "score": 3},
            {"question_id": 22, "title": "Other &amp; more", "score": 1}
        ]});
        let answers = json!({"items": [
            {"answer_id": 5, "question_id": 22, "score": 9, "is_accepted": false, "creation_date": 100, "body": "<p>b</p>"},
            {"answer_id": 4, "question_id": 11, "score": 2, "is_accepted": false, "creation_date": 200, "body": "<p>c</p>"},
            {"answer_id": 3, "question_id": 11, "score": 1, "is_accepted": true, "creation_date": 300, "body": "<p>Use <code>Println</code>.</p>"}
        ]});
        let docs = stackexchange_docs(&questions, &answers, 5);
        assert_eq!(docs.iter().map(|d| d.url.as_str()).collect::<Vec<_>>(), [
            "https://stackoverflow.com/a/3",
            "https://stackoverflow.com/a/4",
            "https://stackoverflow.com/a/5"
        ]);
        assert_eq!(docs[0].body, "Use `Println`.");
        assert_eq!(docs[0].source_signals["is_accepted"], 1.0);
        assert_eq!(docs[0].source_signals["score"], 1.0);
        assert_eq!(docs[2].title, "Other & more");
        assert_eq!(stackexchange_docs(&questions, &answers, 1).len(), 1);
    }

    #[test]
    fn github_and_web_shapes() {
        let gh = json!({"items": [{"html_url": "https://github.com/o/r/issues/1", "title": "t", "body": "b",
            "created_at": "2024-01-02T03:04:05Z", "comments": 4, "state": "closed", "reactions": {"total_count": 2}}]});
        let d = &github_docs(&gh, 5)[0];
        assert_eq!(d.published_at, Some(1704164645));
        assert_eq!(d.source_signals["closed"], 1.0);

        let web = json!({"results": [{"url": "https://go.dev/doc", "title": "Doc", "content": "x &lt; y"}]});
        assert_eq!(web_docs(&web, 5)[0].body, "x < y");
        let cse = json!({"items": [{"link": "https://a", "title": "A", "snippet": "s"}]});
        assert_eq!(web_docs(&cse, 5)[0].url, "https://a");
    }
}
