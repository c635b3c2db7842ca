//! Bundled data dictionary of common public attributes.

use std::collections::HashMap;
use std::sync::LazyLock;

use super::{Tag, Vr};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagInfo {
    pub keyword: String,
    pub vr: Vr,
}

macro_rules! dict {
    ($(($g:literal, $e:literal, $kw:literal, $vr:ident)),* $(,)?) => {
        const ENTRIES: &[(u16, u16, &str, Vr)] = &[$(($g, $e, $kw, Vr::$vr)),*];
    };
}

dict![
    // file meta
    (0x0002, 0x0000, "FileMetaInformationGroupLength", UL),
    (0x0002, 0x0001, "FileMetaInformationVersion", OB),
    (0x0002, 0x0002, "MediaStorageSOPClassUID", UI),
    (0x0002, 0x0003, "MediaStorageSOPInstanceUID", UI),
    (0x0002, 0x0010, "TransferSyntaxUID", UI),
    (0x0002, 0x0012, "ImplementationClassUID", UI),
    (0x0002, 0x0013, "ImplementationVersionName", SH),
    (0x0002, 0x0016, "SourceApplicationEntityTitle", AE),
    // SOP common, general study/series/equipment
    (0x0008, 0x0005, "SpecificCharacterSet", CS),
    (0x0008, 0x0008, "ImageType", CS),
    (0x0008, 0x0012, "InstanceCreationDate", DA),
    (0x0008, 0x0013, "InstanceCreationTime", TM),
    (0x0008, 0x0014, "InstanceCreatorUID", UI),
    (0x0008, 0x0016, "SOPClassUID", UI),
    (0x0008, 0x0018, "SOPInstanceUID", UI),
    (0x0008, 0x0020, "StudyDate", DA),
    (0x0008, 0x0021, "SeriesDate", DA),
    (0x0008, 0x0022, "AcquisitionDate", DA),
    (0x0008, 0x0023, "ContentDate", DA),
    (0x0008, 0x002A, "AcquisitionDateTime", DT),
    (0x0008, 0x0030, "StudyTime", TM),
    (0x0008, 0x0031, "SeriesTime", TM),
    (0x0008, 0x0032, "AcquisitionTime", TM),
    (0x0008, 0x0033, "ContentTime", TM),
    (0x0008, 0x0050, "AccessionNumber", SH),
    (0x0008, 0x0052, "QueryRetrieveLevel", CS),
    (0x0008, 0x0054, "RetrieveAETitle", AE),
    (0x0008, 0x0056, "InstanceAvailability", CS),
    (0x0008, 0x0060, "Modality", CS),
    (0x0008, 0x0061, "ModalitiesInStudy", CS),
    (0x0008, 0x0062, "SOPClassesInStudy", UI),
    (0x0008, 0x0064, "ConversionType", CS),
    (0x0008, 0x0068, "PresentationIntentType", CS),
    (0x0008, 0x0070, "Manufacturer", LO),
    (0x0008, 0x0080, "InstitutionName", LO),
    (0x0008, 0x0081, "InstitutionAddress", ST),
    (0x0008, 0x0090, "ReferringPhysicianName", PN),
    (0x0008, 0x0092, "ReferringPhysicianAddress", ST),
    (0x0008, 0x0094, "ReferringPhysicianTelephoneNumbers", SH),
    (0x0008, 0x0100, "CodeValue", SH),
    (0x0008, 0x0102, "CodingSchemeDesignator", SH),
    (0x0008, 0x0103, "CodingSchemeVersion", SH),
    (0x0008, 0x0104, "CodeMeaning", LO),
    (0x0008, 0x0105, "MappingResource", CS),
    (0x0008, 0x0201, "TimezoneOffsetFromUTC", SH),
    (0x0008, 0x1010, "StationName", SH),
    (0x0008, 0x1030, "StudyDescription", LO),
    (0x0008, 0x1032, "ProcedureCodeSequence", SQ),
    (0x0008, 0x103E, "SeriesDescription", LO),
    (0x0008, 0x1040, "InstitutionalDepartmentName", LO),
    (0x0008, 0x1048, "PhysiciansOfRecord", PN),
    (0x0008, 0x1050, "PerformingPhysicianName", PN),
    (0x0008, 0x1060, "NameOfPhysiciansReadingStudy", PN),
    (0x0008, 0x1070, "OperatorsName", PN),
    (0x0008, 0x1080, "AdmittingDiagnosesDescription", LO),
    (0x0008, 0x1084, "AdmittingDiagnosesCodeSequence", SQ),
    (0x0008, 0x1090, "ManufacturerModelName", LO),
    (0x0008, 0x1110, "ReferencedStudySequence", SQ),
    (0x0008, 0x1111, "ReferencedPerformedProcedureStepSequence", SQ),
    (0x0008, 0x1115, "ReferencedSeriesSequence", SQ),
    (0x0008, 0x1140, "ReferencedImageSequence", SQ),
    (0x0008, 0x114A, "ReferencedInstanceSequence", SQ),
    (0x0008, 0x1150, "ReferencedSOPClassUID", UI),
    (0x0008, 0x1155, "ReferencedSOPInstanceUID", UI),
    (0x0008, 0x1160, "ReferencedFrameNumber", IS),
    (0x0008, 0x1199, "ReferencedSOPSequence", SQ),
    (0x0008, 0x2111, "DerivationDescription", ST),
    (0x0008, 0x2112, "SourceImageSequence", SQ),
    (0x0008, 0x9123, "CreatorVersionUID", UI),
    (0x0008, 0x9124, "DerivationImageSequence", SQ),
    (0x0008, 0x9205, "PixelPresentation", CS),
    (0x0008, 0x9206, "VolumetricProperties", CS),
    (0x0008, 0x9207, "VolumeBasedCalculationTechnique", CS),
    (0x0008, 0x9215, "DerivationCodeSequence", SQ),
    // patient
    (0x0010, 0x0010, "PatientName", PN),
    (0x0010, 0x0020, "PatientID", LO),
    (0x0010, 0x0021, "IssuerOfPatientID", LO),
    (0x0010, 0x0030, "PatientBirthDate", DA),
    (0x0010, 0x0032, "PatientBirthTime", TM),
    (0x0010, 0x0040, "PatientSex", CS),
    (0x0010, 0x1000, "OtherPatientIDs", LO),
    (0x0010, 0x1001, "OtherPatientNames", PN),
    (0x0010, 0x1010, "PatientAge", AS),
    (0x0010, 0x1020, "PatientSize", DS),
    (0x0010, 0x1030, "PatientWeight", DS),
    (0x0010, 0x2160, "EthnicGroup", SH),
    (0x0010, 0x21B0, "AdditionalPatientHistory", LT),
    (0x0010, 0x4000, "PatientComments", LT),
    (0x0012, 0x0062, "PatientIdentityRemoved", CS),
    (0x0012, 0x0063, "DeidentificationMethod", LO),
    // acquisition
    (0x0018, 0x0010, "ContrastBolusAgent", LO),
    (0x0018, 0x0015, "BodyPartExamined", CS),
    (0x0018, 0x0020, "ScanningSequence", CS),
    (0x0018, 0x0021, "SequenceVariant", CS),
    (0x0018, 0x0022, "ScanOptions", CS),
    (0x0018, 0x0023, "MRAcquisitionType", CS),
    (0x0018, 0x0024, "SequenceName", SH),
    (0x0018, 0x0031, "Radiopharmaceutical", LO),
    (0x0018, 0x0050, "SliceThickness", DS),
    (0x0018, 0x0060, "KVP", DS),
    (0x0018, 0x0070, "CountsAccumulated", IS),
    (0x0018, 0x0080, "RepetitionTime", DS),
    (0x0018, 0x0081, "EchoTime", DS),
    (0x0018, 0x0082, "InversionTime", DS),
    (0x0018, 0x0083, "NumberOfAverages", DS),
    (0x0018, 0x0084, "ImagingFrequency", DS),
    (0x0018, 0x0085, "ImagedNucleus", SH),
    (0x0018, 0x0086, "EchoNumbers", IS),
    (0x0018, 0x0087, "MagneticFieldStrength", DS),
    (0x0018, 0x0088, "SpacingBetweenSlices", DS),
    (0x0018, 0x0089, "NumberOfPhaseEncodingSteps", IS),
    (0x0018, 0x0091, "EchoTrainLength", IS),
    (0x0018, 0x0093, "PercentSampling", DS),
    (0x0018, 0x0094, "PercentPhaseFieldOfView", DS),
    (0x0018, 0x0095, "PixelBandwidth", DS),
    (0x0018, 0x1000, "DeviceSerialNumber", LO),
    (0x0018, 0x1020, "SoftwareVersions", LO),
    (0x0018, 0x1030, "ProtocolName", LO),
    (0x0018, 0x1040, "ContrastBolusRoute", LO),
    (0x0018, 0x1041, "ContrastBolusVolume", DS),
    (0x0018, 0x1042, "ContrastBolusStartTime", TM),
    (0x0018, 0x1049, "ContrastBolusIngredientConcentration", DS),
    (0x0018, 0x1063, "FrameTime", DS),
    (0x0018, 0x1072, "RadiopharmaceuticalStartTime", TM),
    (0x0018, 0x1074, "RadionuclideTotalDose", DS),
    (0x0018, 0x1075, "RadionuclideHalfLife", DS),
    (0x0018, 0x1100, "ReconstructionDiameter", DS),
    (0x0018, 0x1110, "DistanceSourceToDetector", DS),
    (0x0018, 0x1111, "DistanceSourceToPatient", DS),
    (0x0018, 0x1120, "GantryDetectorTilt", DS),
    (0x0018, 0x1130, "TableHeight", DS),
    (0x0018, 0x1140, "RotationDirection", CS),
    (0x0018, 0x1150, "ExposureTime", IS),
    (0x0018, 0x1151, "XRayTubeCurrent", IS),
    (0x0018, 0x1152, "Exposure", IS),
    (0x0018, 0x1160, "FilterType", SH),
    (0x0018, 0x1164, "ImagerPixelSpacing", DS),
    (0x0018, 0x1170, "GeneratorPower", IS),
    (0x0018, 0x1190, "FocalSpots", DS),
    (0x0018, 0x1191, "AnodeTargetMaterial", CS),
    (0x0018, 0x11A0, "BodyPartThickness", DS),
    (0x0018, 0x11A2, "CompressionForce", DS),
    (0x0018, 0x1210, "ConvolutionKernel", SH),
    (0x0018, 0x1250, "ReceiveCoilName", SH),
    (0x0018, 0x1310, "AcquisitionMatrix", US),
    (0x0018, 0x1314, "FlipAngle", DS),
    (0x0018, 0x1316, "SAR", DS),
    (0x0018, 0x1400, "AcquisitionDeviceProcessingDescription", LO),
    (0x0018, 0x1401, "AcquisitionDeviceProcessingCode", LO),
    (0x0018, 0x1508, "PositionerType", CS),
    (0x0018, 0x1510, "PositionerPrimaryAngle", DS),
    (0x0018, 0x1511, "PositionerSecondaryAngle", DS),
    (0x0018, 0x5100, "PatientPosition", CS),
    (0x0018, 0x5101, "ViewPosition", CS),
    (0x0018, 0x6011, "SequenceOfUltrasoundRegions", SQ),
    (0x0018, 0x7004, "DetectorType", CS),
    (0x0018, 0x9004, "ContentQualification", CS),
    (0x0018, 0x9073, "AcquisitionDuration", FD),
    (0x0018, 0x9306, "SingleCollimationWidth", FD),
    (0x0018, 0x9307, "TotalCollimationWidth", FD),
    (0x0018, 0x9310, "TableFeedPerRotation", FD),
    (0x0018, 0x9311, "SpiralPitchFactor", FD),
    (0x0018, 0x9345, "CTDIvol", FD),
    // relationship, image plane, frame of reference, multi-frame dimensions
    (0x0020, 0x000D, "StudyInstanceUID", UI),
    (0x0020, 0x000E, "SeriesInstanceUID", UI),
    (0x0020, 0x0010, "StudyID", SH),
    (0x0020, 0x0011, "SeriesNumber", IS),
    (0x0020, 0x0012, "AcquisitionNumber", IS),
    (0x0020, 0x0013, "InstanceNumber", IS),
    (0x0020, 0x0020, "PatientOrientation", CS),
    (0x0020, 0x0032, "ImagePositionPatient", DS),
    (0x0020, 0x0037, "ImageOrientationPatient", DS),
    (0x0020, 0x0052, "FrameOfReferenceUID", UI),
    (0x0020, 0x0060, "Laterality", CS),
    (0x0020, 0x0062, "ImageLaterality", CS),
    (0x0020, 0x0100, "TemporalPositionIdentifier", IS),
    (0x0020, 0x0105, "NumberOfTemporalPositions", IS),
    (0x0020, 0x0200, "SynchronizationFrameOfReferenceUID", UI),
    (0x0020, 0x0242, "SOPInstanceUIDOfConcatenationSource", UI),
    (0x0020, 0x1002, "ImagesInAcquisition", IS),
    (0x0020, 0x1040, "PositionReferenceIndicator", LO),
    (0x0020, 0x1041, "SliceLocation", DS),
    (0x0020, 0x1206, "NumberOfStudyRelatedSeries", IS),
    (0x0020, 0x1208, "NumberOfStudyRelatedInstances", IS),
    (0x0020, 0x1209, "NumberOfSeriesRelatedInstances", IS),
    (0x0020, 0x4000, "ImageComments", LT),
    (0x0020, 0x9056, "StackID", SH),
    (0x0020, 0x9057, "InStackPositionNumber", UL),
    (0x0020, 0x9111, "FrameContentSequence", SQ),
    (0x0020, 0x9113, "PlanePositionSequence", SQ),
    (0x0020, 0x9116, "PlaneOrientationSequence", SQ),
    (0x0020, 0x9157, "DimensionIndexValues", UL),
    (0x0020, 0x9164, "DimensionOrganizationUID", UI),
    (0x0020, 0x9165, "DimensionIndexPointer", AT),
    (0x0020, 0x9167, "FunctionalGroupPointer", AT),
    (0x0020, 0x9221, "DimensionOrganizationSequence", SQ),
    (0x0020, 0x9222, "DimensionIndexSequence", SQ),
    (0x0020, 0x9421, "DimensionDescriptionLabel", LO),
    // image pixel, presentation
    (0x0028, 0x0002, "SamplesPerPixel", US),
    (0x0028, 0x0004, "PhotometricInterpretation", CS),
    (0x0028, 0x0006, "PlanarConfiguration", US),
    (0x0028, 0x0008, "NumberOfFrames", IS),
    (0x0028, 0x0009, "FrameIncrementPointer", AT),
    (0x0028, 0x0010, "Rows", US),
    (0x0028, 0x0011, "Columns", US),
    (0x0028, 0x0030, "PixelSpacing", DS),
    (0x0028, 0x0034, "PixelAspectRatio", IS),
    (0x0028, 0x0051, "CorrectedImage", CS),
    (0x0028, 0x0100, "BitsAllocated", US),
    (0x0028, 0x0101, "BitsStored", US),
    (0x0028, 0x0102, "HighBit", US),
    (0x0028, 0x0103, "PixelRepresentation", US),
    (0x0028, 0x0106, "SmallestImagePixelValue", US),
    (0x0028, 0x0107, "LargestImagePixelValue", US),
    (0x0028, 0x0120, "PixelPaddingValue", US),
    (0x0028, 0x0301, "BurnedInAnnotation", CS),
    (0x0028, 0x1050, "WindowCenter", DS),
    (0x0028, 0x1051, "WindowWidth", DS),
    (0x0028, 0x1052, "RescaleIntercept", DS),
    (0x0028, 0x1053, "RescaleSlope", DS),
    (0x0028, 0x1054, "RescaleType", LO),
    (0x0028, 0x1055, "WindowCenterWidthExplanation", LO),
    (0x0028, 0x2110, "LossyImageCompression", CS),
    (0x0028, 0x2112, "LossyImageCompressionRatio", DS),
    (0x0028, 0x2114, "LossyImageCompressionMethod", CS),
    (0x0028, 0x3002, "LUTDescriptor", US),
    (0x0028, 0x3006, "LUTData", OW),
    (0x0028, 0x3010, "VOILUTSequence", SQ),
    (0x0028, 0x9110, "PixelMeasuresSequence", SQ),
    (0x0028, 0x9132, "FrameVOILUTSequence", SQ),
    (0x0028, 0x9145, "PixelValueTransformationSequence", SQ),
    // study/visit, procedure step
    (0x0032, 0x1032, "RequestingPhysician", PN),
    (0x0032, 0x1060, "RequestedProcedureDescription", LO),
    (0x0032, 0x4000, "StudyComments", LT),
    (0x0040, 0x0244, "PerformedProcedureStepStartDate", DA),
    (0x0040, 0x0245, "PerformedProcedureStepStartTime", TM),
    (0x0040, 0x0253, "PerformedProcedureStepID", SH),
    (0x0040, 0x0254, "PerformedProcedureStepDescription", LO),
    (0x0040, 0x0275, "RequestAttributesSequence", SQ),
    (0x0040, 0x1001, "RequestedProcedureID", SH),
    // structured reporting
    (0x0040, 0xA010, "RelationshipType", CS),
    (0x0040, 0xA040, "ValueType", CS),
    (0x0040, 0xA043, "ConceptNameCodeSequence", SQ),
    (0x0040, 0xA160, "TextValue", UT),
    (0x0040, 0xA168, "ConceptCodeSequence", SQ),
    (0x0040, 0xA491, "CompletionFlag", CS),
    (0x0040, 0xA493, "VerificationFlag", CS),
    (0x0040, 0xA504, "ContentTemplateSequence", SQ),
    (0x0040, 0xA730, "ContentSequence", SQ),
    (0x0040, 0xDB00, "TemplateIdentifier", CS),
    // nuclear medicine / PET
    (0x0054, 0x0016, "RadiopharmaceuticalInformationSequence", SQ),
    (0x0054, 0x0081, "NumberOfSlices", US),
    (0x0054, 0x1001, "Units", CS),
    (0x0054, 0x1002, "CountsSource", CS),
    (0x0054, 0x1101, "AttenuationCorrectionMethod", LO),
    (0x0054, 0x1102, "DecayCorrection", CS),
    (0x0054, 0x1300, "FrameReferenceTime", DS),
    // segmentation
    (0x0062, 0x0001, "SegmentationType", CS),
    (0x0062, 0x0002, "SegmentSequence", SQ),
    (0x0062, 0x0003, "SegmentedPropertyCategoryCodeSequence", SQ),
    (0x0062, 0x0004, "SegmentNumber", US),
    (0x0062, 0x0005, "SegmentLabel", LO),
    (0x0062, 0x0006, "SegmentDescription", ST),
    (0x0062, 0x0008, "SegmentAlgorithmType", CS),
    (0x0062, 0x0009, "SegmentAlgorithmName", LO),
    (0x0062, 0x000A, "SegmentIdentificationSequence", SQ),
    (0x0062, 0x000B, "ReferencedSegmentNumber", US),
    (0x0062, 0x000C, "RecommendedDisplayGrayscaleValue", US),
    (0x0062, 0x000D, "RecommendedDisplayCIELabValue", US),
    (0x0062, 0x000E, "MaximumFractionalValue", US),
    (0x0062, 0x000F, "SegmentedPropertyTypeCodeSequence", SQ),
    (0x0062, 0x0010, "SegmentationFractionalType", CS),
    (0x0062, 0x0013, "SegmentsOverlap", CS),
    (0x0062, 0x0020, "TrackingID", UT),
    (0x0062, 0x0021, "TrackingUID", UI),
    (0x0070, 0x0080, "ContentLabel", CS),
    (0x0070, 0x0081, "ContentDescription", LO),
    (0x0070, 0x0084, "ContentCreatorName", PN),
    // RT structure set
    (0x3006, 0x0002, "StructureSetLabel", SH),
    (0x3006, 0x0004, "StructureSetName", LO),
    (0x3006, 0x0006, "StructureSetDescription", ST),
    (0x3006, 0x0008, "StructureSetDate", DA),
    (0x3006, 0x0009, "StructureSetTime", TM),
    (0x3006, 0x0010, "ReferencedFrameOfReferenceSequence", SQ),
    (0x3006, 0x0012, "RTReferencedStudySequence", SQ),
    (0x3006, 0x0014, "RTReferencedSeriesSequence", SQ),
    (0x3006, 0x0016, "ContourImageSequence", SQ),
    (0x3006, 0x0020, "StructureSetROISequence", SQ),
    (0x3006, 0x0022, "ROINumber", IS),
    (0x3006, 0x0024, "ReferencedFrameOfReferenceUID", UI),
    (0x3006, 0x0026, "ROIName", LO),
    (0x3006, 0x0028, "ROIDescription", ST),
    (0x3006, 0x002A, "ROIDisplayColor", IS),
    (0x3006, 0x0036, "ROIGenerationAlgorithm", CS),
    (0x3006, 0x0038, "ROIGenerationDescription", LO),
    (0x3006, 0x0039, "ROIContourSequence", SQ),
    (0x3006, 0x0040, "ContourSequence", SQ),
    (0x3006, 0x0042, "ContourGeometricType", CS),
    (0x3006, 0x0044, "ContourSlabThickness", DS),
    (0x3006, 0x0046, "NumberOfContourPoints", IS),
    (0x3006, 0x0048, "ContourNumber", IS),
    (0x3006, 0x0050, "ContourData", DS),
    (0x3006, 0x0080, "RTROIObservationsSequence", SQ),
    (0x3006, 0x0082, "ObservationNumber", IS),
    (0x3006, 0x0084, "ReferencedROINumber", IS),
    (0x3006, 0x0085, "ROIObservationLabel", SH),
    (0x3006, 0x00A4, "RTROIInterpretedType", CS),
    (0x3006, 0x00A6, "ROIInterpreter", PN),
    (0x300E, 0x0002, "ApprovalStatus", CS),
    (0x5200, 0x9229, "SharedFunctionalGroupsSequence", SQ),
    (0x5200, 0x9230, "PerFrameFunctionalGroupsSequence", SQ),
    (0x7FE0, 0x0010, "PixelData", OW),
];

struct Dictionary {
    by_tag: HashMap<Tag, (&'static str, Vr)>,
    by_keyword: HashMap<&'static str, Tag>,
}

static DICTIONARY: LazyLock<Dictionary> = LazyLock::new(|| {
    let mut by_tag = HashMap::with_capacity(ENTRIES.len());
    let mut by_keyword = HashMap::with_capacity(ENTRIES.len());
    for &(g, e, kw, vr) in ENTRIES {
        let tag = Tag::new(g, e);
        by_tag.insert(tag, (kw, vr));
        by_keyword.insert(kw, tag);
    }
    Dictionary { by_tag, by_keyword }
});

/// Keyword and VR for `tag`. Tags outside the dictionary get the synthetic
/// keyword `unknown_GGGG_EEEE` and VR `UN`.
pub fn lookup_tag(tag: Tag) -> TagInfo {
    match DICTIONARY.by_tag.get(&tag) {
        Some(&(kw, vr)) => TagInfo {
            keyword: kw.to_string(),
            vr,
        },
        None => TagInfo {
            keyword: format!("unknown_{:04X}_{:04X}", tag.group, tag.element),
            vr: Vr::UN,
        },
    }
}

/// Dictionary VR, if the tag is known.
pub fn dictionary_vr(tag: Tag) -> Option<Vr> {
    DICTIONARY.by_tag.get(&tag).map(|&(_, vr)| vr)
}

pub fn keyword(tag: Tag) -> Option<&'static str> {
    DICTIONARY.by_tag.get(&tag).map(|&(kw, _)| kw)
}

pub fn tag_for_keyword(keyword: &str) -> Option<Tag> {
    DICTIONARY.by_keyword.get(keyword).copied()
}

/// Number of bundled entries.
pub fn len() -> usize {
    DICTIONARY.by_tag.len()
}

/// Every bundled tag, in no particular order.
pub fn known_tags() -> impl Iterator<Item = (Tag, &'static str, Vr)> {
    ENTRIES.iter().map(|&(g, e, kw, vr)| (Tag::new(g, e), kw, vr))
}
