"""Misbehaving components for controller tests."""
import time

from rantest.component import Component, ComponentError, Param, register


@register("slowstart")
class SlowStart(Component):
    PASSIVE = True
    PARAMS = {"delay": Param("float", default=1.0, minimum=0.0)}

    def setup(self):
        time.sleep(self.params["delay"])


@register("sticky")
class Sticky(Component):
    """Takes ``delay`` seconds to stop."""

    PASSIVE = True
    PARAMS = {"delay": Param("float", default=1.0, minimum=0.0)}

    def stop(self):
        time.sleep(self.params["delay"])
        super().stop()


@register("picky")
class Picky(Component):
    """Rejects any odd ``value``."""

    PASSIVE = True
    PARAMS = {"value": Param("int", default=0)}

    def setup(self):
        if self.params["value"] % 2:
            raise ComponentError("bad params: value must be even")
