#pragma once

#include <nfseer/anfis.hpp>
#include <nfseer/bank.hpp>
#include <nfseer/csv.hpp>
#include <nfseer/dataset.hpp>
#include <nfseer/error.hpp>
#include <nfseer/evaluation.hpp>
#include <nfseer/mann_whitney.hpp>
#include <nfseer/mapping.hpp>
#include <nfseer/metrics.hpp>
#include <nfseer/plots.hpp>
#include <nfseer/project.hpp>
#include <nfseer/rating.hpp>
#include <nfseer/seer_sem.hpp>
