"""uner-tag: run one external model over raw text, emit corpus + manifest row."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .models import ModelLoadError, load_model
from .tagging import append_manifest, iter_texts, manifest_row, tag_corpus, write_corpus


def main(argv: "list[str] | None" = None) -> int:
    parser = argparse.ArgumentParser(
        prog="uner-tag",
        description="Tag a raw text corpus with one model and emit interchange records.",
    )
    parser.add_argument("--model", required=True, help="model spec, e.g. lexicon:gazetteer.tsv")
    parser.add_argument("--in", dest="input", required=True, help="text file or directory of .txt")
    parser.add_argument("--out", dest="output", required=True, help="interchange corpus to write")
    parser.add_argument("--manifest", help="run-manifest TSV to append to")
    parser.add_argument("--model-id", help="identifier for provenance (default: from spec)")
    parser.add_argument("--recall", type=float, default=0.0,
                        help="reported recall for the manifest row (configuration input)")
    parser.add_argument("--scheme", help="override the model's scheme_id")
    args = parser.parse_args(argv)

    try:
        model = load_model(args.model)
    except ModelLoadError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 2
    model_id = args.model_id or args.model.replace(":", "-").replace("/", "-")
    scheme_id = args.scheme or model.scheme_id
    try:
        records = tag_corpus(model, iter_texts(args.input), model_id)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    count = write_corpus(records, args.output)
    print(f"{count} documents -> {args.output}")
    if args.manifest:
        out = Path(args.output)
        base = Path(args.manifest).parent.resolve()
        try:
            relative = out.resolve().relative_to(base)
        except ValueError:
            relative = out.resolve()
        append_manifest(manifest_row(model_id, args.recall, scheme_id, str(relative)), args.manifest)
        print(f"manifest row appended to {args.manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
