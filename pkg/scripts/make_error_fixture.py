"""Build the baseline validation-log corpus and matching provider changelog.

The corpus has one log per failed script with the per-label error counts
from the shipped taxonomy table, Terraform-style message text, and a
changelog in which a fixed subset of the unsupported arguments and blocks
were deprecated before the training cutoff. Decoy changelog entries
(deprecations after the cutoff, non-deprecation mentions, near-miss
tokens) exercise the attribution rules.

    python3 scripts/make_error_fixture.py --out tests/fixtures/baseline
"""

from __future__ import annotations

import argparse
import json
import logging
import random
from collections import Counter
from importlib import resources
from pathlib import Path

log = logging.getLogger("make_error_fixture")

# errors per failed script: value -> number of scripts (315 scripts, 774 errors)
SCRIPT_SIZES = {1: 60, 2: 146, 3: 68, 4: 20, 5: 10, 6: 5, 7: 3, 9: 1, 11: 1, 17: 1}

# unsupported elements that the changelog records as deprecated before the cutoff
DEPRECATED_ARGS = [
    ("aws_s3_bucket", "acl", 4), ("aws_s3_bucket", "acceleration_status", 2),
    ("aws_s3_bucket", "request_payer", 2), ("aws_db_instance", "name", 3),
    ("aws_instance", "cpu_core_count", 2), ("aws_lb_target_group", "lambda_multi_value_headers_enabled", 1),
    ("aws_eip", "vpc", 2), ("aws_redshift_cluster", "snapshot_copy", 1),
]
DEPRECATED_BLOCKS = [("aws_s3_bucket", "versioning", 1), ("aws_s3_bucket", "server_side_encryption_configuration", 1)]

RESOURCES = ["aws_instance", "aws_s3_bucket", "aws_db_instance", "aws_lambda_function", "aws_iam_role",
             "aws_security_group", "aws_route53_record", "aws_vpc", "aws_subnet", "aws_lb", "aws_ecs_service",
             "aws_cloudwatch_metric_alarm", "aws_dynamodb_table", "aws_sagemaker_model", "aws_kinesis_stream"]
FAKE_ARGS = ["enable_logging", "retention_days", "auto_scaling", "encryption_enabled", "tags_all_override",
             "instance_name", "backup_window_hours", "publicly_visible", "lifecycle_policy", "max_retries",
             "storage_class", "region_name", "log_group", "monitoring_interval_seconds", "ssl_policy_name"]
FAKE_BLOCKS = ["logging_config", "scaling_policy", "health_check", "encryption", "retention", "notification",
               "access_control", "backup", "metrics", "network_settings"]
FAKE_RESOURCES = ["aws_s3_bucket_config", "aws_lambda_permission_policy", "aws_rds_instance", "aws_ec2_instance",
                  "aws_vpc_network", "aws_iam_role_attachment", "aws_cloudwatch_alarm", "aws_elb_listener",
                  "aws_dynamodb_global_table_replica", "aws_sagemaker_endpoint_config"]
REQUIRED_ARGS = {"aws_instance": "ami", "aws_lambda_function": "function_name", "aws_iam_role": "assume_role_policy",
                 "aws_route53_record": "zone_id", "aws_subnet": "vpc_id", "aws_ecs_service": "name",
                 "aws_cloudwatch_metric_alarm": "comparison_operator", "aws_dynamodb_table": "hash_key",
                 "aws_sagemaker_model": "execution_role_arn", "aws_kinesis_stream": "name"}
REQUIRED_BLOCKS = {"aws_dynamodb_table": "attribute", "aws_sagemaker_model": "primary_container",
                   "aws_lb": "subnet_mapping", "aws_ecs_service": "network_configuration"}

HEADER = "Initializing the backend...\nInitializing provider plugins...\nTerraform has been successfully initialized!\n\n"


def _stanza(summary: str, resource: str, name: str, line: int, detail: str, code: str = "") -> str:
    body = [f"Error: {summary}", "", f'  on main.tf line {line}, in resource "{resource}" "{name}":']
    if code:
        body.append(f"  {line}: {code}")
    body += ["", detail]
    return "╷\n" + "\n".join(("│ " + l).rstrip() for l in body) + "\n╵\n"


def _plain(summary: str, detail: str) -> str:
    return "╷\n│ Error: " + summary + "\n│\n│ " + detail + "\n╵\n"


class Builder:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.dep_args = [(r, a) for r, a, k in DEPRECATED_ARGS for _ in range(k)]
        self.dep_blocks = [(r, b) for r, b, k in DEPRECATED_BLOCKS for _ in range(k)]

    def where(self):
        return self.rng.choice(RESOURCES), self.rng.choice(["this", "main", "example", "primary"]), self.rng.randint(3, 80)

    def message(self, label_id: str, deprecated: bool) -> str:
        r = self.rng
        res, name, line = self.where()
        if label_id == "arg_unsupported":
            if deprecated:
                res, arg = self.dep_args.pop()
            else:
                arg = r.choice(FAKE_ARGS)
            return _stanza("Unsupported argument", res, name, line,
                           f'An argument named "{arg}" is not expected here.', f'{arg} = "value"')
        if label_id == "block_unsupported":
            if deprecated:
                res, blk = self.dep_blocks.pop()
            else:
                blk = r.choice(FAKE_BLOCKS)
            return _stanza("Unsupported block type", res, name, line,
                           f'Blocks of type "{blk}" are not expected here.', f"{blk} {{")
        if label_id == "res_unknown_type":
            fake = r.choice(FAKE_RESOURCES)
            return _stanza("Invalid resource type", fake, name, line,
                           f'The provider hashicorp/aws does not support resource type "{fake}".')
        if label_id == "arg_missing":
            res = r.choice(sorted(REQUIRED_ARGS))
            return _stanza("Missing required argument", res, name, line,
                           f'The argument "{REQUIRED_ARGS[res]}" is required, but no definition was found.')
        if label_id == "block_missing":
            res = r.choice(sorted(REQUIRED_BLOCKS))
            blk = REQUIRED_BLOCKS[res]
            return _stanza(f"Insufficient {blk} blocks", res, name, line,
                           f'At least 1 "{blk}" blocks are required.')
        if label_id == "block_too_many":
            return _stanza("Too many versioning blocks", "aws_s3_bucket", name, line,
                           'No more than 1 "versioning" blocks are allowed')
        if label_id == "arg_wrong_value":
            return _stanza("Invalid value for variable" if r.random() < 0.5 else "Incorrect attribute value type",
                           res, name, line, 'Inappropriate value for attribute "port": a number is required.')
        if label_id == "arg_reserved":
            return _stanza("Reserved argument name in resource block", res, name, line,
                           'The name "count" is reserved for use in a future version of Terraform.')
        if label_id == "arg_conflict":
            return _stanza("Conflicting configuration arguments", res, name, line,
                           '"subnet_id": conflicts with network_interface')
        if label_id == "arg_repeated":
            return _stanza("Attribute redefined", res, name, line,
                           'The argument "tags" was already set at main.tf:12,3-7. Each argument may be set only once.')
        if label_id == "attr_missing":
            return _stanza("Unsupported attribute", res, name, line,
                           'This object has no argument, nested block, or exported attribute named "endpoint_url".')
        if label_id == "attr_misuse":
            return _stanza("Missing resource instance key" if r.random() < 0.5 else "Invalid index", res, name, line,
                           "Because aws_instance.web has \"count\" set, its attributes must be accessed on specific instances.")
        if label_id == "res_undeclared":
            return _stanza("Reference to undeclared resource", res, name, line,
                           'A managed resource "aws_vpc" "main" has not been declared in the root module.')
        if label_id == "res_duplicate":
            return _stanza(f'Duplicate resource "{res}" configuration', res, name, line,
                           f'A {res} resource named "{name}" was already declared at main.tf:3,1-40.')
        if label_id == "rt_missing_file":
            return _stanza("Invalid value for \"path\" parameter" if r.random() < 0.5 else "Error in function call",
                           "aws_lambda_function", name, line,
                           'Call to function "filebase64sha256" failed: open lambda.zip: no such file or directory.'
                           if r.random() < 0.5 else 'Invalid value for "path" parameter: no file exists at "lambda.zip".')
        if label_id == "rt_provider_missing":
            return _plain("Provider configuration not present",
                          'To work with aws_instance.web its original provider configuration at provider["registry.terraform.io/hashicorp/aws"].west is required.')
        if label_id == "rt_provider_duplicate":
            return _plain("Duplicate provider configuration", 'A default (non-aliased) provider configuration for "aws" was already given.')
        if label_id == "rt_version":
            return _plain("Failed to query available provider packages",
                          "Could not retrieve the list of available versions for provider hashicorp/aws: no available releases match the given constraints ~> 6.0")
        if label_id == "syntax_language":
            return _plain("Argument or block definition required",
                          "An argument or block definition is required here.")
        if label_id == "syntax_format":
            return _plain("Invalid resource name",
                          "A name must start with a letter or underscore and may contain only letters, digits, underscores, and dashes.")
        raise KeyError(label_id)


def changelog_text() -> str:
    dep = {}
    for r, a, _ in DEPRECATED_ARGS:
        dep.setdefault(r, []).append(("argument", a))
    for r, b, _ in DEPRECATED_BLOCKS:
        dep.setdefault(r, []).append(("block", b))
    out = ["# Changelog", "", "## 5.40.0 (Unreleased)", "", "BUG FIXES:", "",
           "* resource/aws_instance: `retention_days` is deprecated and will be removed", "",
           "## 5.31.0 (December 14, 2023)", "", "NOTES:", "",
           # deprecated only after the cutoff: must not count
           "* resource/aws_lambda_function: The `enable_logging` argument is deprecated",
           "* resource/aws_security_group: The `ssl_policy_name` argument has been deprecated", "",
           "## 5.22.0 (October 2023)", "", "ENHANCEMENTS:", "",
           # mentioned, but never deprecated
           "* resource/aws_s3_bucket: Add `storage_class` validation",
           "* resource/aws_iam_role: Improve `max_retries` handling", "",
           "## 5.0.0 (May 25, 2023)", "", "BREAKING CHANGES:", ""]
    for r in sorted(dep):
        for kind, name in dep[r]:
            word = "argument" if kind == "argument" else "configuration block"
            out.append(f"* resource/{r}: The `{name}` {word} has been deprecated. Use the `{r}_{name}` resource instead")
    out += ["", "## 4.0.0 (February 10, 2022)", "", "BREAKING CHANGES:", "",
            # near miss: `logging_config_v2` is not the token `logging_config`
            "* resource/aws_lambda_function: `logging_config_v2` is deprecated",
            "* resource/aws_s3_bucket: The `acl` argument is deprecated in favour of `aws_s3_bucket_acl`", ""]
    return "\n".join(out) + "\n"


def build(out_dir: Path, seed: int = 7) -> dict:
    rng = random.Random(seed)
    tax = json.loads(resources.files("iackg").joinpath("data/taxonomy.json").read_text(encoding="utf-8"))
    labels = []
    for lab in tax["labels"]:
        labels += [lab["id"]] * lab["baseline_count"]
    rng.shuffle(labels)
    n_dep = {"arg_unsupported": sum(k for *_, k in DEPRECATED_ARGS),
             "block_unsupported": sum(k for *_, k in DEPRECATED_BLOCKS)}
    # mark which occurrences are deprecated: the first n of each kind in shuffled order
    seen = Counter()
    flags = []
    for lab in labels:
        seen[lab] += 1
        flags.append(seen[lab] <= n_dep.get(lab, 0))
    sizes = [size for size, n in sorted(SCRIPT_SIZES.items()) for _ in range(n)]
    rng.shuffle(sizes)
    assert sum(sizes) == len(labels), (sum(sizes), len(labels))
    b = Builder(rng)
    logs = out_dir / "logs"
    logs.mkdir(parents=True, exist_ok=True)
    for old in logs.glob("*.log"):
        old.unlink()
    pos = 0
    for k, size in enumerate(sizes, start=1):
        parts = [HEADER]
        if rng.random() < 0.2:
            parts.append("╷\n│ Warning: Argument is deprecated\n│\n│ Use the aws_s3_bucket_versioning resource instead.\n╵\n")
        for lab, dep in zip(labels[pos:pos + size], flags[pos:pos + size]):
            parts.append(b.message(lab, dep))
        pos += size
        (logs / f"s{k:04d}.log").write_text("\n".join(parts), encoding="utf-8")
    (out_dir / "CHANGELOG.md").write_text(changelog_text(), encoding="utf-8")
    return {"scripts": len(sizes), "errors": len(labels)}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("tests/fixtures/baseline"))
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    info = build(args.out, args.seed)
    log.info("wrote %(errors)d errors across %(scripts)d logs", info)


if __name__ == "__main__":
    main()
