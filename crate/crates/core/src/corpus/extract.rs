//! Selector-driven body-text extraction from HTML and XML inputs.

use std::collections::HashSet;

use scraper::{ElementRef, Html, Node, Selector};

use crate::error::{Error, Result};

const HTML_BLOCKS: &[&str] = &[
    "p", "div", "section", "article", "main", "header", "footer", "aside", "h1", "h2", "h3", "h4", "h5", "h6",
    "li", "ul", "ol", "br", "tr", "td", "th", "table", "blockquote", "pre", "figcaption", "dd", "dt",
];
const HTML_SKIP: &[&str] = &["script", "style", "noscript", "template", "svg"];

const XML_BLOCKS: &[&str] = &[
    "p", "title", "sec", "ref", "abstract", "list-item", "caption", "label", "table-wrap", "fig", "disp-formula",
    "article-title", "td", "th", "tr",
];

/// Text of every element matching `selector` (the whole `<body>` when
/// `None`). Nested matches are not repeated, script and style content is
/// dropped, block elements end lines, and runs of spaces collapse.
pub fn extract_html(html: &str, selector: Option<&str>) -> Result<String> {
    let doc = Html::parse_document(html);
    let sel_text = selector.unwrap_or("body");
    let sel = Selector::parse(sel_text).map_err(|e| Error::config(format!("bad selector {sel_text:?}: {e}")))?;
    let mut seen = HashSet::new();
    let mut buf = String::new();
    for el in doc.select(&sel) {
        if el.ancestors().any(|a| seen.contains(&a.id())) {
            continue;
        }
        seen.insert(el.id());
        html_text(el, &mut buf);
        buf.push('\n');
    }
    Ok(tidy_lines(&buf))
}

fn html_text(el: ElementRef<'_>, out: &mut String) {
    for child in el.children() {
        match child.value() {
            Node::Text(t) => out.push_str(t),
            Node::Element(e) => {
                let name = e.name();
                if HTML_SKIP.contains(&name) {
                    continue;
                }
                let block = HTML_BLOCKS.contains(&name);
                if block {
                    out.push('\n');
                }
                if let Some(child_el) = ElementRef::wrap(child) {
                    html_text(child_el, out);
                }
                if block {
                    out.push('\n');
                }
            }
            _ => {}
        }
    }
}

/// Text under every element whose local name is listed in `selector`
/// (comma separated, e.g. `"abstract,body"`); the whole document when `None`.
pub fn extract_xml(xml: &str, selector: Option<&str>) -> Result<String> {
    let opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let doc = roxmltree::Document::parse_with_options(xml, opts).map_err(|e| Error::invalid(format!("xml: {e}")))?;
    let names: Vec<&str> = selector
        .map(|s| s.split(',').map(str::trim).filter(|s| !s.is_empty()).collect())
        .unwrap_or_default();
    let mut buf = String::new();
    if names.is_empty() {
        xml_text(doc.root_element(), &mut buf);
    } else {
        for node in doc.descendants().filter(|n| n.is_element()) {
            let matches = |n: &roxmltree::Node<'_, '_>| n.is_element() && names.contains(&n.tag_name().name());
            if matches(&node) && !node.ancestors().skip(1).any(|a| matches(&a)) {
                xml_text(node, &mut buf);
                buf.push('\n');
            }
        }
    }
    Ok(tidy_lines(&buf))
}

fn xml_text(node: roxmltree::Node<'_, '_>, out: &mut String) {
    for child in node.children() {
        if child.is_text() {
            out.push_str(child.text().unwrap_or_default());
        } else if child.is_element() {
            let block = XML_BLOCKS.contains(&child.tag_name().name());
            if block {
                out.push('\n');
            }
            xml_text(child, out);
            if block {
                out.push('\n');
            }
        }
    }
}

fn tidy_lines(raw: &str) -> String {
    raw.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}
