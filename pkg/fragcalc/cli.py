"""
Command-line front end.

    fragcalc parse|classify|prenex|reduce|eval|oracle|graph|example ...

Formulas come from the positional argument, from --file (one formula per
line, ; comments) or from standard input. Output is text, or one JSON object
per line with --json. Exit codes: 0 success, 1 domain error, 2 usage error.
"""
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence
import argparse
import logging
import sys

from pydantic import BaseModel, ValidationError

from fragcalc import ffred, pcoding, redgraph, vfred
from fragcalc.config import get_settings
from fragcalc.errors import FragcalcError
from fragcalc.ffred import CurveDatum
from fragcalc.formula import Constant, Formula, free_variables
from fragcalc.fpalg import RatFunc, RingEvaluator, chi_image, exists_bounded, is_pth_power, pth_root_decompose
from fragcalc.fragments import (
    EXISTENTIAL, FragmentDescriptor, format_descriptor, mem_fragment, parse_descriptor,
    prenex_rank, prnx,
)
from fragcalc.models import (
    ClassifyResponse, CurveDatumFile, ErrorResponse, EvalResponse, OracleResponse,
    ParseResponse, PrenexResponse, ReduceResponse, TournamentResponse,
)
from fragcalc.signature import FIELD_RING, Language, LiteralDomain, extend_with_constants, resolve_language, ring, with_literals
from fragcalc.structures import evaluate, resolve_structure, tournament_models, tournament_sentence
from fragcalc.syntax import format_formula, parse_formula, parse_formulas, parse_term

logger = logging.getLogger(__name__)
settings = get_settings()

MAPS = (
    "chi", "pi", "tau-param", "tau-noparam", "tau-ff", "tau-rat-const", "tau-rat-noconst",
    "tau-curve-0", "tau-curve-p", "tau-drop-pi", "tau-a1e", "tau-finres",
)

# Language a map reads its input in, unless --language overrides it.
_MAP_LANGUAGES = {
    "tau-rat-const": "ring+t",
    "tau-rat-noconst": "ring+t",
    "tau-drop-pi": "val+t",
    "tau-a1e": "val",
    "tau-finres": "val",
}


# Input and output helpers

def _read_formulas(args: argparse.Namespace, language: Language) -> List[Formula]:
    if getattr(args, "formula", None):
        return [parse_formula(args.formula, language)]
    if getattr(args, "file", None):
        return parse_formulas(Path(args.file).read_text(), language)
    return parse_formulas(sys.stdin.read(), language)


def _read_one(args: argparse.Namespace, language: Language) -> Formula:
    formulas = _read_formulas(args, language)
    if len(formulas) != 1:
        args.parser.error(f"expected one formula, got {len(formulas)}")
    return formulas[0]


def _emit(args: argparse.Namespace, records: Sequence[BaseModel], lines: Sequence[str]) -> None:
    if args.json:
        for record in records:
            print(record.model_dump_json())
    else:
        for line in lines:
            print(line)


def _bool(value: bool) -> str:
    return "true" if value else "false"


def _language(args: argparse.Namespace, default: str = "ring") -> Language:
    return resolve_language(args.language or default)


def _fragment(text: str) -> FragmentDescriptor:
    return parse_descriptor(text)


# Subcommands

def cmd_parse(args: argparse.Namespace) -> int:
    """Round-trip formulas through the canonical printer."""
    formulas = _read_formulas(args, _language(args))
    records = [ParseResponse(formula=format_formula(phi),
                             free_variables=sorted(v.name for v in free_variables(phi)))
               for phi in formulas]
    _emit(args, records, [r.formula for r in records])
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    language = _language(args)
    fragment = _fragment(args.fragment)
    records = [ClassifyResponse(formula=format_formula(phi), fragment=format_descriptor(fragment),
                                member=mem_fragment(fragment, language, phi))
               for phi in _read_formulas(args, language)]
    _emit(args, records, [_bool(r.member) for r in records])
    return 0


def cmd_prenex(args: argparse.Namespace) -> int:
    language = _language(args)
    fragment = _fragment(args.relative_to)
    records = []
    for phi in _read_formulas(args, language):
        records.append(PrenexResponse(
            formula=format_formula(phi), fragment=format_descriptor(fragment),
            prenex=format_formula(prnx(fragment, language, phi)),
            prefix_length=prenex_rank(fragment, language, phi),
        ))
    _emit(args, records, [r.prenex for r in records])
    return 0


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        args.parser.error(f"map {args.map} requires {', '.join(missing)}")


def _curve(args: argparse.Namespace) -> CurveDatum:
    _require(args, "curve")
    data = CurveDatumFile.model_validate_json(Path(args.curve).read_text())
    return CurveDatum.from_file(data)


def _curve_language(curve: CurveDatum, generators: Sequence[str]) -> Language:
    return extend_with_constants(curve.language(), list(generators), FIELD_RING.sort)


def _reduce(args: argparse.Namespace) -> ReduceResponse:
    name = args.map
    fragment = _fragment(args.fragment)
    constants = args.constants.split(",") if args.constants else None
    generators = tuple(args.generators.split(","))
    if len(generators) != 2:
        args.parser.error("--generators takes two constant names")
    params: Dict[str, object] = {}

    def response(outputs: List[Formula], phi: Optional[Formula], target: Optional[FragmentDescriptor]) -> ReduceResponse:
        return ReduceResponse(
            map=name, input=format_formula(phi) if phi is not None else None,
            output=[format_formula(o) for o in outputs],
            target_fragment=format_descriptor(target) if target is not None else None,
            parameters=params,
        )

    if name in ("chi", "pi"):
        _require(args, "p", "n")
        params.update(p=args.p, n=args.n)
        if name == "chi":
            params["r"] = args.r
            return response([pcoding.chi(args.p, args.n, args.r)], None, EXISTENTIAL)
        return response([pcoding.pi(args.p, args.n)], None, EXISTENTIAL)

    if name in ("tau-param", "tau-noparam", "tau-ff"):
        _require(args, "p", "n")
        params.update(p=args.p, n=args.n, fragment=format_descriptor(fragment))
        if name == "tau-param":
            names = constants or [f"c{i}" for i in range(1, args.n + 1)]
            language = _language(args, f"ring+{','.join(names)}")
            phi = _read_one(args, language)
            out = pcoding.tau_param(args.p, args.n, language, fragment, phi, names)
        elif name == "tau-noparam":
            language = _language(args)
            phi = _read_one(args, language)
            out = pcoding.tau_noparam(args.p, args.n, language, fragment, phi)
        else:
            _require(args, "gamma")
            params["d"] = args.d
            language = _language(args)
            gamma = parse_formula(args.gamma, language)
            phi = _read_one(args, language)
            out = pcoding.tau_funcfield(args.p, args.n, args.d, gamma, fragment, phi, language)
        return response([out], phi, pcoding.target_fragment(name, fragment, args.n, args.d))

    if name in ("tau-rat-const", "tau-rat-noconst"):
        language = _language(args, _MAP_LANGUAGES[name])
        phi = _read_one(args, language)
        params["constant"] = args.constant
        if name == "tau-rat-const":
            params["q"] = args.q
            first, second = ffred.tau_rat_const(args.q, phi, language, args.constant)
            return response([first, second], phi, None)
        _require(args, "gamma")
        gamma = parse_formula(args.gamma, language)
        out = ffred.tau_rat_noconst(gamma, phi, language, args.constant)
        return response([out], phi, ffred.target_fragment(name))

    if name in ("tau-curve-0", "tau-curve-p"):
        curve = _curve(args)
        language = _curve_language(curve, generators)
        phi = _read_one(args, language)
        params.update(p=curve.p, generators=",".join(generators))
        if name == "tau-curve-0":
            _require(args, "gamma")
            gamma = parse_formula(args.gamma, language)
            out = ffred.tau_curve_char0(curve, gamma, fragment, phi, generators)
            return response([out], phi, ffred.target_fragment(name, fragment))
        return response([ffred.tau_curve_charp(curve, phi, generators)], phi, ffred.target_fragment(name))

    if name == "tau-drop-pi":
        language = _language(args, _MAP_LANGUAGES[name])
        phi = _read_one(args, language)
        n = args.n if args.n is not None else 0
        params.update(n=n, fragment=format_descriptor(fragment), closed=_bool(args.closed))
        if args.closed:
            out = vfred.tau_drop_pi_closed(n, fragment, phi, language, args.constant)
            return response([out], phi, vfred.drop_pi_closed_target(n, fragment))
        out = vfred.tau_drop_pi(n, fragment, phi, language, args.constant)
        return response([out], phi, vfred.drop_pi_target(n, fragment))

    if name == "tau-a1e":
        _require(args, "q")
        language = _language(args, _MAP_LANGUAGES[name])
        phi = _read_one(args, language)
        params.update(q=args.q, constant=args.constant)
        return response([vfred.tau_A1E_to_E(args.q, language, phi, args.constant)], phi, EXISTENTIAL)

    _require(args, "q")
    language = _language(args, _MAP_LANGUAGES[name])
    phi = _read_one(args, language)
    params.update(q=args.q, fragment=format_descriptor(fragment))
    out = vfred.tau_finite_residue(args.q, fragment, language, phi)
    return response([out], phi, vfred.finite_residue_target(fragment))


def cmd_reduce(args: argparse.Namespace) -> int:
    record = _reduce(args)
    logger.info(f"reduce {record.map}: {len(record.output)} output formula(s)")
    _emit(args, [record], record.output)
    return 0


def _assignment(text: Optional[str]) -> Dict[str, object]:
    env: Dict[str, object] = {}
    for item in (text or "").split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise FragcalcError(f"assignment {item!r} is not name=value")
        name, value = (part.strip() for part in item.split("=", 1))
        env[name] = int(value) if value.lstrip("-").isdigit() else value
    return env


def cmd_eval(args: argparse.Namespace) -> int:
    structure = resolve_structure(args.structure)
    env = _assignment(args.assign)
    records = [EvalResponse(formula=format_formula(phi), structure=structure.name,
                            value=evaluate(structure, phi, env))
               for phi in _read_formulas(args, structure.language)]
    _emit(args, records, [_bool(r.value) for r in records])
    return 0


def _element(text: str, p: int) -> RatFunc:
    language = with_literals(ring(), LiteralDomain(kind="Fp(s)", p=p))
    term = parse_term(text, language, FIELD_RING.sort)
    if isinstance(term, Constant) and isinstance(term.value, RatFunc):
        return term.value
    return RingEvaluator(p).term(term, {})


def cmd_oracle(args: argparse.Namespace) -> int:
    """Expose the F_p(s) arithmetic and the bounded witness search."""
    p, op = args.p, args.operation
    if op == "search":
        language = with_literals(ring(), LiteralDomain(kind="Fp(s)", p=p))
        phi = parse_formula(args.input, language)
        result = exists_bounded(phi, args.bound, p)
        witnesses = {name: value.literal() for name, value in sorted(result.witnesses.items())}
        record = OracleResponse(operation=op, input=args.input, result=result.sat,
                                status=result.status, witnesses=witnesses)
        lines = [result.status.value] + [f"{name} = {value}" for name, value in witnesses.items()]
        _emit(args, [record], lines)
        return 0
    x = _element(args.input, p)
    if op == "decompose":
        result = [part.literal() for part in pth_root_decompose(p, x)]
    elif op == "pth-power":
        result = is_pth_power(p, x)
    elif op == "chi-image":
        result = [part.literal() for part in chi_image(p, args.r, x)]
    else:
        result = str(x.height)
    record = OracleResponse(operation=op, input=args.input, result=result)
    if isinstance(result, bool):
        lines = [_bool(result)]
    elif isinstance(result, list):
        lines = result
    else:
        lines = [result]
    _emit(args, [record], lines)
    return 0


def cmd_graph(args: argparse.Namespace) -> int:
    if args.query == "dump":
        dump = redgraph.graph_dump()
        lines = [f"{n.id}  {n.label}  {n.colour}" for n in dump.nodes]
        lines += [redgraph.format_edge(e) for e in redgraph.EDGES]
        _emit(args, [dump], lines)
        return 0
    assumptions = redgraph.parse_assumptions(args.assume)
    if args.query == "classes":
        record = redgraph.classes_response(assumptions)
        _emit(args, [record], [" ".join(members) for members in record.classes])
        return 0
    if args.source is None or args.target is None:
        args.parser.error("graph path requires --from and --to")
    record = redgraph.path_response(args.source, args.target, assumptions)
    path = redgraph.reduction_path(args.source, args.target, assumptions)
    if path is None:
        lines = ["no path"]
    elif not path:
        lines = ["empty path"]
    else:
        lines = [redgraph.format_edge(e) for e in path]
    _emit(args, [record], lines)
    return 0


def cmd_example(args: argparse.Namespace) -> int:
    """The tournament graphs separating A^2 E from A_2 E."""
    sigma = tournament_sentence()
    m, n = tournament_models(args.copies)
    record = TournamentResponse(
        copies=args.copies,
        sentence=format_formula(sigma),
        in_forall_nested=mem_fragment(parse_descriptor("A^2 E"), None, sigma),
        in_forall_block=mem_fragment(parse_descriptor("A2 E"), None, sigma),
        holds_in_n=evaluate(n, sigma),
        holds_in_m=evaluate(m, sigma),
    )
    lines = [
        f"sigma: {record.sentence}",
        f"sigma in A^2 E: {_bool(record.in_forall_nested)}",
        f"sigma in A2 E: {_bool(record.in_forall_block)}",
        f"sigma holds in N: {_bool(record.holds_in_n)}, in M: {_bool(record.holds_in_m)}",
    ]
    _emit(args, [record], lines)
    return 0


# Parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="one JSON object per line")
    common.add_argument("--verbose", "-v", action="store_true", help="log at DEBUG")

    formula_input = argparse.ArgumentParser(add_help=False)
    formula_input.add_argument("formula", nargs="?", help="formula text (default: read --file or stdin)")
    formula_input.add_argument("--file", help="newline-delimited formula corpus")
    formula_input.add_argument("--language", help="ring, graph, val, residue, eq, with [literals] and +constants")

    parser = argparse.ArgumentParser(prog="fragcalc", description="First-order fragment calculus toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Callable[[argparse.Namespace], int], parents, help_text: str):
        p = sub.add_parser(name, parents=parents, help=help_text)
        p.set_defaults(handler=handler, parser=p)
        return p

    add("parse", cmd_parse, [common, formula_input], "parse and print formulas canonically")

    p = add("classify", cmd_classify, [common, formula_input], "fragment membership")
    p.add_argument("--fragment", required=True, help='descriptor such as "E", "A1[E]", "A2 E", "A^2 E"')

    p = add("prenex", cmd_prenex, [common, formula_input], "prenex form relative to a fragment")
    p.add_argument("--relative-to", default="F0", help="fragment left intact (default F0)")

    p = add("reduce", cmd_reduce, [common, formula_input], "apply a reduction map")
    p.add_argument("--map", required=True, choices=MAPS)
    p.add_argument("--p", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--q", type=int)
    p.add_argument("--fragment", default="E", help="inner fragment F (default E)")
    p.add_argument("--gamma", help="formula with one free field variable defining the base field")
    p.add_argument("--constants", help="comma-separated p-basis constant names")
    p.add_argument("--constant", default="t", help="name of the distinguished constant")
    p.add_argument("--curve", help="curve datum JSON file")
    p.add_argument("--generators", default="X,Y", help="names of the curve generators")
    p.add_argument("--closed", action="store_true", help="tau-drop-pi over boolean combinations")

    p = add("eval", cmd_eval, [common, formula_input], "truth in a finite structure")
    p.add_argument("--structure", required=True, help="gamma2, Z/6, F4, N2, M2 or a JSON file")
    p.add_argument("--assign", help="comma-separated name=value")

    p = add("oracle", cmd_oracle, [common], "F_p(s) arithmetic and witness search")
    p.add_argument("operation", choices=("decompose", "pth-power", "chi-image", "height", "search"))
    p.add_argument("input", help="element of F_p(s) as a term, or an existential formula for search")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--bound", type=int, default=None, help=f"height bound (default {settings.witness_height})")

    p = add("graph", cmd_graph, [common], "reduction graph queries")
    p.add_argument("query", choices=("path", "classes", "dump"))
    p.add_argument("--from", dest="source")
    p.add_argument("--to", dest="target")
    p.add_argument("--assume", help="comma-separated hypotheses: R4, charZero, charP, kFinite, kPerfect")

    p = add("example", cmd_example, [common], "worked examples")
    p.add_argument("name", choices=("tournament",))
    p.add_argument("--copies", type=int, default=1)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.log_level,
        format=settings.log_format,
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except FragcalcError as e:
        logger.error(f"{args.command} failed: {e}")
        _report(args, str(e), type(e).__name__)
    except (OSError, ValidationError) as e:
        logger.error(f"{args.command} failed on input: {e}")
        _report(args, str(e).splitlines()[0], type(e).__name__)
    except Exception as e:
        logger.error(f"{args.command}: unexpected {type(e).__name__}: {e}")
        _report(args, f"internal error: {e}", "InternalError")
    return 1


def _report(args: argparse.Namespace, message: str, kind: str) -> None:
    if args.json:
        print(ErrorResponse(error=message, kind=kind).model_dump_json(), file=sys.stderr)
    else:
        print(f"error: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
