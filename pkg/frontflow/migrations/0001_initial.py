# Generated by Django 4.2.7 on 2026-10-19 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ScenarioRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('run', 'Frozen-occupancy run'), ('iterate', 'Fixed-point iteration'), ('check', 'Invariant suite'), ('barrier', 'Barrier containment')], max_length=16)),
                ('config_path', models.CharField(blank=True, help_text='Scenario file the run was built from', max_length=500)),
                ('seed', models.IntegerField(blank=True, null=True)),
                ('exit_code', models.IntegerField(default=0)),
                ('summary', models.JSONField(blank=True, help_text='Flat summary of the run outputs', null=True)),
                ('certificate', models.JSONField(blank=True, help_text='Weak-solution certificate, when one was computed', null=True)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
