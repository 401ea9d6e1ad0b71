#!/usr/bin/env python3
"""Convert MATRES or TB-Dense relation files plus TimeML documents to canonical JSONL.

Each output line is
  {"instance_id", "doc_id", "tokens", "trigger1": [s, e], "trigger2": [s, e], "label"}

Pairs spanning two sentences keep only those two sentences, concatenated in text order.
Pairs whose first event occurs after the second are swapped and the label inverted.
"""

import argparse
import json
import re
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

TBDENSE_LABELS = {
    "b": "BEFORE",
    "a": "AFTER",
    "i": "INCLUDES",
    "ii": "INCLUDED IN",
    "s": "SIMULTANEOUS",
    "v": "VAGUE",
}

INVERSE = {
    "BEFORE": "AFTER",
    "AFTER": "BEFORE",
    "INCLUDES": "INCLUDED IN",
    "INCLUDED IN": "INCLUDES",
    "EQUAL": "EQUAL",
    "SIMULTANEOUS": "SIMULTANEOUS",
    "VAGUE": "VAGUE",
}

TOKEN_RE = re.compile(r"\w+(?:[-'’.]\w+)*|[^\w\s]")
SENTENCE_END_RE = re.compile(r"(?<=[.!?])[\"'’”)]*\s+(?=[\"'‘“(]?[A-Z0-9])|\n\s*\n")


class Document:
    def __init__(self, doc_id, text, events, instances):
        self.doc_id = doc_id
        self.events = events  # eid -> (char_start, char_end)
        self.instances = instances  # eiid -> eid
        self.sentences = []  # list of (tokens, [(char_start, char_end)])
        start = 0
        for m in SENTENCE_END_RE.finditer(text):
            self._add_sentence(text, start, m.start())
            start = m.end()
        self._add_sentence(text, start, len(text))

    def _add_sentence(self, text, lo, hi):
        tokens, offsets = [], []
        for m in TOKEN_RE.finditer(text, lo, hi):
            tokens.append(m.group())
            offsets.append((m.start(), m.end()))
        if tokens:
            self.sentences.append((tokens, offsets))

    def locate(self, eid):
        """(sentence index, token start, token end) of an event mention."""
        if eid not in self.events:
            raise KeyError(f"{self.doc_id}: unknown event {eid}")
        c0, c1 = self.events[eid]
        for si, (_, offsets) in enumerate(self.sentences):
            hit = [i for i, (a, b) in enumerate(offsets) if a < c1 and c0 < b]
            if hit:
                return si, hit[0], hit[-1] + 1
        raise KeyError(f"{self.doc_id}: event {eid} not aligned to any token")


def read_timeml(path):
    root = ET.parse(path).getroot()
    doc_el = root.find(".//DOCID")
    doc_id = doc_el.text.strip() if doc_el is not None and doc_el.text else Path(path).stem
    text_el = root.find(".//TEXT")
    if text_el is None:
        raise ValueError(f"{path}: no TEXT element")
    parts, events = [], {}

    def walk(el):
        if el.tag == "EVENT":
            start = sum(len(p) for p in parts)
            parts.append("".join(el.itertext()))
            events[el.get("eid")] = (start, start + len(parts[-1]))
        else:
            if el.text:
                parts.append(el.text)
            for child in el:
                walk(child)
                if child.tail:
                    parts.append(child.tail)

    walk(text_el)
    instances = {mi.get("eiid"): mi.get("eventID") for mi in root.iter("MAKEINSTANCE")}
    return Document(doc_id, "".join(parts), events, instances)


def make_instance(doc, eid1, eid2, label, instance_id):
    s1, a1, b1 = doc.locate(eid1)
    s2, a2, b2 = doc.locate(eid2)
    if (s1, a1) > (s2, a2):
        (s1, a1, b1), (s2, a2, b2) = (s2, a2, b2), (s1, a1, b1)
        label = INVERSE[label]
    if s1 == s2:
        tokens = list(doc.sentences[s1][0])
    else:
        first = doc.sentences[s1][0]
        tokens = list(first) + list(doc.sentences[s2][0])
        a2 += len(first)
        b2 += len(first)
    if not (b1 <= a2):
        raise ValueError(f"{instance_id}: overlapping trigger spans")
    return {
        "instance_id": instance_id,
        "doc_id": doc.doc_id,
        "tokens": tokens,
        "trigger1": [a1, b1],
        "trigger2": [a2, b2],
        "label": label,
    }


def matres_rows(lines):
    for n, line in enumerate(lines, 1):
        f = line.strip().split("\t")
        if len(f) < 6:
            if line.strip():
                raise ValueError(f"relation line {n}: expected 6 tab-separated fields")
            continue
        yield f[0], "ei" + f[3].removeprefix("ei"), "ei" + f[4].removeprefix("ei"), f[5].upper()


def tbdense_rows(lines):
    for n, line in enumerate(lines, 1):
        f = line.split()
        if len(f) < 4:
            if line.strip():
                raise ValueError(f"relation line {n}: expected doc e1 e2 label")
            continue
        if not (f[1].startswith("e") and f[2].startswith("e")):
            continue  # event-event pairs only
        if f[3] not in TBDENSE_LABELS:
            raise ValueError(f"relation line {n}: unknown label {f[3]!r}")
        yield f[0], f[1], f[2], TBDENSE_LABELS[f[3]]


def load_docs(paths):
    docs = {}
    for p in paths:
        files = sorted(Path(p).rglob("*.tml")) if Path(p).is_dir() else [Path(p)]
        for f in files:
            d = read_timeml(f)
            docs[d.doc_id] = d
            docs.setdefault(f.name.removesuffix(".tml"), d)
    return docs


def read_doc_filter(spec):
    if not spec:
        return None
    p = Path(spec)
    items = p.read_text().split() if p.exists() else spec.split(",")
    return {i.strip().removesuffix(".tml") for i in items if i.strip()}


def convert(fmt, relation_files, timeml_paths, doc_filter=None):
    docs = load_docs(timeml_paths)
    out, seen = [], set()
    rows = matres_rows if fmt == "matres" else tbdense_rows
    for rf in relation_files:
        with open(rf, encoding="utf-8") as fh:
            for doc_id, a, b, label in rows(fh):
                doc_id = doc_id.removesuffix(".tml")
                if doc_filter is not None and doc_id not in doc_filter:
                    continue
                if doc_id not in docs:
                    raise KeyError(f"no TimeML document for {doc_id}")
                doc = docs[doc_id]
                if fmt == "matres":
                    a, b = doc.instances.get(a, a), doc.instances.get(b, b)
                instance_id = f"{doc_id}-{a}-{b}"
                if instance_id in seen:
                    continue
                seen.add(instance_id)
                out.append(make_instance(doc, a, b, label, instance_id))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--format", choices=["matres", "tbdense"], required=True)
    ap.add_argument("--relations", nargs="+", required=True, help="relation annotation file(s)")
    ap.add_argument("--timeml", nargs="+", required=True, help="TimeML files or directories")
    ap.add_argument("--docs", help="doc ids to keep: a file of ids or a comma-separated list")
    ap.add_argument("--out", help="output JSONL (stdout when omitted)")
    args = ap.parse_args(argv)
    try:
        records = convert(args.format, args.relations, args.timeml, read_doc_filter(args.docs))
    except (KeyError, ValueError, ET.ParseError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for r in records:
            sink.write(json.dumps(r, ensure_ascii=False) + "\n")
    finally:
        if args.out:
            sink.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
