#!/usr/bin/env python3
"""Convert a HybridQA checkout into tabtext JSON Lines.

Expects the layout of the public release:

    ROOT/released_data/{train,dev,test}.json
    WIKI/tables_tok/<table_id>.json
    WIKI/request_tok/<table_id>.json

where WIKI is the WikiTables-WithLinks checkout. Writes tables.jsonl,
passages.jsonl and train/dev/test.jsonl into OUT.
"""

import argparse
import json
import os
import sys
from urllib.parse import unquote


def load(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def write_jsonl(path, items):
    with open(path, "w", encoding="utf-8") as f:
        for item in items:
            f.write(json.dumps(item, ensure_ascii=False) + "\n")


def title_of(link):
    return unquote(link.rsplit("/", 1)[-1]).replace("_", " ")


def convert_table(tid, raw, passages):
    """Returns a tabtext table, registering linked passages as a side effect."""

    def cell(c):
        text, links = c[0], c[1] if len(c) > 1 else []
        return {"text": text, "links": [l for l in links if l in passages]}

    meta = " ".join(s for s in (raw.get("title", ""), raw.get("section_title", "")) if s)
    headers = [h[0] if isinstance(h, list) else h for h in raw["header"]]
    rows = [[cell(c) for c in row] for row in raw["data"] if len(row) == len(headers)]
    return {"id": tid, "meta": meta, "headers": headers, "rows": rows}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--root", required=True, help="HybridQA checkout (contains released_data/)")
    ap.add_argument("--wiki", required=True, help="WikiTables-WithLinks checkout")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    splits = {}
    for name in ("train", "dev", "test"):
        path = os.path.join(args.root, "released_data", f"{name}.json")
        splits[name] = load(path) if os.path.exists(path) else []

    table_ids = sorted({q["table_id"] for qs in splits.values() for q in qs})
    passages, tables = {}, []
    for tid in table_ids:
        req = os.path.join(args.wiki, "request_tok", f"{tid}.json")
        if os.path.exists(req):
            for link, text in load(req).items():
                if text and text.strip() and link not in passages:
                    passages[link] = text
        tab = os.path.join(args.wiki, "tables_tok", f"{tid}.json")
        if not os.path.exists(tab):
            print(f"warning: table {tid} missing", file=sys.stderr)
            continue
        t = convert_table(tid, load(tab), passages)
        if t["headers"] and t["rows"]:
            tables.append(t)

    known = {t["id"] for t in tables}
    os.makedirs(args.out, exist_ok=True)
    write_jsonl(os.path.join(args.out, "tables.jsonl"), tables)
    write_jsonl(
        os.path.join(args.out, "passages.jsonl"),
        ({"id": k, "title": title_of(k), "text": v} for k, v in sorted(passages.items())),
    )
    for name, qs in splits.items():
        out = []
        for q in qs:
            if q["table_id"] not in known:
                continue
            item = {"id": q["question_id"], "text": q["question"], "table_id": q["table_id"]}
            if "answer-text" in q:
                item["answer_text"] = q["answer-text"]
            out.append(item)
        write_jsonl(os.path.join(args.out, f"{name}.jsonl"), out)
        print(f"{name}: {len(out)} questions")
    print(f"{len(tables)} tables, {len(passages)} passages")


if __name__ == "__main__":
    main()
