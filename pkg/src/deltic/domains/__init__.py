"""Domain instantiations bundled as registries plus derived-program catalogs."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..calculus import Registry
from ..core import BaseType, DelticError


class BundleLawError(DelticError):
    """An op registered in a bundle failed its incrementalization laws."""


@dataclass
class InstanceBundle:
    """A frozen-after-setup registry with a default base for literals."""

    name: str
    registry: Registry
    literal_base: BaseType
    _validated: bool = field(default=False, repr=False)

    def validate(self, samples=40, seed=7):
        """Run the law suite over every registered op; raise on a violation.

        Returns the list of reports.  Bundles are not usable for incremental
        evaluation until this has passed; the CLI and the acceptance suite
        run it, and `ensure_valid` caches the outcome.
        """
        from ..oracle import check_op_laws
        reports = []
        for opdef in self.registry.ops.values():
            for in_ty in opdef.sample_in_tys:
                rep = check_op_laws(opdef, in_ty, samples=samples, seed=seed)
                reports.append(rep)
                if not rep.passed:
                    raise BundleLawError(
                        f"op {opdef.name!r} fails laws at {in_ty!r}: {rep.failures[0]}")
        self._validated = True
        return reports

    def ensure_valid(self):
        if not self._validated:
            self.validate()
        return self


def get_bundle(name: str) -> InstanceBundle:
    """Look up a bundle factory by name and build a frozen instance."""
    from . import gcounter, linalg, relalg, trees
    factories = {
        "linalg": linalg.register_linalg,
        "relalg": relalg.register_relalg,
        "trees": trees.register_trees,
        "gcounter": lambda: gcounter.register_gcounter(("r1", "r2", "r3")),
    }
    if name not in factories:
        raise DelticError(f"unknown bundle: {name!r} (have {sorted(factories)})")
    bundle = factories[name]()
    bundle.registry.freeze()
    return bundle
