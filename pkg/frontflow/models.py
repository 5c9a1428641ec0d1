from django.db import models


class ScenarioRun(models.Model):
    """Ledger entry for one scenario command invocation."""

    COMMAND_CHOICES = [
        ('run', 'Frozen-occupancy run'),
        ('iterate', 'Fixed-point iteration'),
        ('check', 'Invariant suite'),
        ('barrier', 'Barrier containment'),
    ]

    command = models.CharField(max_length=16, choices=COMMAND_CHOICES)
    config_path = models.CharField(max_length=500, blank=True, help_text="Scenario file the run was built from")
    seed = models.IntegerField(null=True, blank=True)
    exit_code = models.IntegerField(default=0)
    summary = models.JSONField(blank=True, null=True, help_text="Flat summary of the run outputs")
    certificate = models.JSONField(blank=True, null=True, help_text="Weak-solution certificate, when one was computed")
    output_dir = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.command} {self.config_path or '-'} (exit {self.exit_code})"
